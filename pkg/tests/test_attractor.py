import itertools

import numpy as np
import pytest

from selfaffine.attractor import (
    ImageSpec,
    PointCloud,
    box_count,
    image_basis,
    project_points,
    rasterise,
    render,
    sample_attractor,
)
from selfaffine.errors import DomainError, EstimationError, PreconditionError, ShapeError
from selfaffine.gallery import build_rotation_shear
from selfaffine.maps import AffineIFS, MatrixTuple

CANTOR = AffineIFS(MatrixTuple([[[1 / 3]], [[1 / 3]]]), [[0.0], [2 / 3]])
SIERPINSKI = AffineIFS(MatrixTuple([np.eye(2) / 2] * 3), [[0, 0], [0.5, 0], [0.25, 0.5]])


def hausdorff(a, b):
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    return max(d.min(axis=1).max(), d.min(axis=0).max())


class TestSampling:
    @pytest.mark.parametrize("mode", ["chaos", "deterministic"])
    def test_cantor_gap(self, mode):
        pts = sample_attractor(CANTOR, mode, count=20_000, depth=10).points[:, 0]
        assert pts.min() >= -1e-9 and pts.max() <= 1 + 1e-9
        assert not np.any((pts > 1 / 3 + 1e-9) & (pts < 2 / 3 - 1e-9))
        # second-level gaps as well
        assert not np.any((pts > 1 / 9 + 1e-9) & (pts < 2 / 9 - 1e-9))

    def test_deterministic_count_and_order(self):
        cloud = sample_attractor(SIERPINSKI, "deterministic", depth=4)
        assert len(cloud) == 3**4
        x0 = SIERPINSKI.fixed_point(0)
        for idx, w in enumerate(itertools.product(range(3), repeat=4)):
            x = x0
            for i in reversed(w):
                x = SIERPINSKI.apply(i, x)
            np.testing.assert_allclose(cloud.points[idx], x, atol=1e-15)

    def test_deterministic_invariance(self):
        ifs = build_rotation_shear(1.0).ifs
        depth = 7
        cloud = sample_attractor(ifs, "deterministic", depth=depth).points
        images = np.concatenate([ifs.apply(i, cloud) for i in range(ifs.count)])
        rho = ifs.linear.contraction_norm
        diam = np.linalg.norm(cloud.max(0) - cloud.min(0))
        sub = slice(None, None, 4)
        assert hausdorff(cloud[sub], images[::4]) <= 2 * rho**depth * diam + hausdorff(cloud, cloud[sub])

    def test_chaos_reproducible(self):
        a = sample_attractor(SIERPINSKI, count=5000, seed=11).points
        b = sample_attractor(SIERPINSKI, count=5000, seed=11).points
        c = sample_attractor(SIERPINSKI, count=5000, seed=12).points
        assert a.tobytes() == b.tobytes() and a.tobytes() != c.tobytes()

    def test_chaos_points_on_attractor(self):
        pts = sample_attractor(SIERPINSKI, count=5000).points
        # every point is in the triangle with vertices (0,0), (1,0), (1/2,1)
        assert np.all(pts[:, 1] >= -1e-12)
        assert np.all(pts[:, 1] <= 2 * pts[:, 0] + 1e-12)
        assert np.all(pts[:, 1] <= 2 * (1 - pts[:, 0]) + 1e-12)

    def test_non_contracting(self):
        ifs = AffineIFS(MatrixTuple([np.eye(2) * 1.2, np.eye(2) / 2]))
        with pytest.raises(PreconditionError):
            sample_attractor(ifs, count=10)
        with pytest.raises(PreconditionError):
            sample_attractor(ifs, "deterministic", depth=2)

    def test_bad_mode(self):
        with pytest.raises(DomainError):
            sample_attractor(SIERPINSKI, "grid")

    def test_cloud_validation(self):
        with pytest.raises(ShapeError):
            PointCloud(np.empty((0, 2)))
        with pytest.raises(DomainError):
            PointCloud([[np.nan, 0.0]])


class TestProjection:
    def test_coordinate_projection_verbatim(self, rng):
        cloud = PointCloud(rng.standard_normal((100, 4)))
        proj = project_points(cloud, np.diag([1.0, 1.0, 0.0, 0.0]))
        np.testing.assert_array_equal(proj.points, cloud.points[:, :2])

    def test_i_tensor_p_panel_is_first_and_third(self, rng):
        inst = build_rotation_shear(1.0)
        cloud = sample_attractor(inst.ifs, count=2000)
        proj = project_points(cloud, inst.projection_i_p)
        np.testing.assert_array_equal(proj.points, cloud.points[:, [0, 2]])
        np.testing.assert_array_equal(inst.projection_i_p, np.kron(np.eye(2), np.diag([1.0, 0.0])))

    def test_isometry(self, rng):
        q = rng.standard_normal((4, 2)) @ rng.standard_normal((2, 4))
        cloud = PointCloud(rng.standard_normal((200, 4)))
        proj = project_points(cloud, q)
        x, y = cloud.points[:100], cloud.points[100:]
        px, py = proj.points[:100], proj.points[100:]
        np.testing.assert_allclose(
            np.linalg.norm(px - py, axis=1), np.linalg.norm((x - y) @ q.T, axis=1), rtol=1e-10, atol=1e-12
        )

    def test_basis_orthonormal(self, rng):
        q = rng.standard_normal((4, 2)) @ rng.standard_normal((2, 4))
        b = image_basis(q)
        np.testing.assert_allclose(b.T @ b, np.eye(2), atol=1e-12)

    @pytest.mark.parametrize("q", [np.eye(4), np.diag([1.0, 0, 0, 0]), np.diag([1.0, 1, 1, 0])])
    def test_rank_must_be_two(self, q):
        with pytest.raises(DomainError):
            project_points(PointCloud(np.ones((3, 4))), q)


class TestBoxCount:
    def test_full_square(self):
        g = (np.arange(1000) + 0.5) / 1000
        xx, yy = np.meshgrid(g, g)
        rep = box_count(PointCloud(np.c_[xx.ravel(), yy.ravel()]))
        assert rep.slope == pytest.approx(2.0, abs=0.1)

    def test_sierpinski(self):
        rep = box_count(sample_attractor(SIERPINSKI, count=300_000, seed=5))
        assert rep.slope == pytest.approx(np.log(3) / np.log(2), abs=0.1)

    def test_segment(self):
        t = np.linspace(0, 1, 100_000)
        rep = box_count(PointCloud(np.c_[t, 0.4 * t + 1]))
        assert rep.slope == pytest.approx(1.0, abs=0.05)

    def test_report_invariants(self, rng):
        rep = box_count(PointCloud(rng.random((200_000, 2))), finest_level=10)
        assert rep.counts == sorted(rep.counts)
        assert all(1 <= c <= rep.points for c in rep.counts)
        assert all(rep.counts[i] <= rep.points / 100 for i in rep.window)
        assert rep.scales[0] == 0.125 and len(rep.scales) == len(rep.levels) == 8

    def test_too_few_points(self, rng):
        with pytest.raises(EstimationError, match="more points"):
            box_count(PointCloud(rng.random((500, 2))))

    def test_planar_only(self, rng):
        with pytest.raises(ShapeError):
            box_count(PointCloud(rng.random((100, 3))))

    def test_level_range(self, rng):
        with pytest.raises(DomainError):
            box_count(PointCloud(rng.random((100, 2))), finest_level=15)


class TestRender:
    @pytest.fixture
    def cloud(self):
        return sample_attractor(SIERPINSKI, count=20_000)

    def test_pgm_header_and_size(self, cloud, tmp_path):
        spec = ImageSpec(64, 32, (0.0, 1.0, 0.0, 1.0))
        path = tmp_path / "s.pgm"
        pixels = render(cloud, spec, path)
        raw = path.read_bytes()
        header = b"P5\n64 32\n255\n"
        assert raw[: len(header)] == header
        assert raw[len(header) :] == pixels.tobytes() and len(raw) == len(header) + 64 * 32

    def test_deterministic(self, cloud, tmp_path):
        spec = ImageSpec.fit(cloud, 100)
        render(cloud, spec, tmp_path / "a.pgm")
        render(cloud, spec, tmp_path / "b.pgm")
        assert (tmp_path / "a.pgm").read_bytes() == (tmp_path / "b.pgm").read_bytes()

    def test_png_same_pixels(self, cloud, tmp_path):
        Image = pytest.importorskip("PIL.Image")
        spec = ImageSpec.fit(cloud, 80)
        pixels = render(cloud, spec, tmp_path / "a.png")
        np.testing.assert_array_equal(np.asarray(Image.open(tmp_path / "a.png")), pixels)

    def test_density_mapping(self):
        cloud = PointCloud([[0.1, 0.1]] * 9 + [[0.9, 0.9]])
        spec = ImageSpec(16, 16, (0.0, 1.0, 0.0, 1.0), mapping="linear")
        px = rasterise(cloud, spec)
        assert px[14, 1] == 0 and px[1, 14] == 255 - round(255 / 9) and px[0, 0] == 255
        logpx = rasterise(cloud, ImageSpec(16, 16, (0.0, 1.0, 0.0, 1.0)))
        assert logpx[1, 14] == 255 - round(255 * np.log(2) / np.log(10))

    @pytest.mark.parametrize(
        "args", [(8, 32, (0, 1, 0, 1)), (32, 32, (0, 0, 0, 1)), (32, 32, (0, 1, 1, 1)), (32, 32, (0, 1, 0, np.inf))]
    )
    def test_spec_validation(self, args):
        with pytest.raises(DomainError):
            ImageSpec(*args)

    def test_degenerate_cloud_bounds(self):
        with pytest.raises(DomainError):
            ImageSpec.fit(PointCloud([[0.5, 0.5], [0.5, 0.5]]))

    def test_unwritable(self, cloud, tmp_path):
        with pytest.raises(OSError):
            render(cloud, ImageSpec.fit(cloud, 32), tmp_path / "missing" / "x.pgm")
