import numpy as np
import pytest

from src.environment.field import (
    FieldError,
    export_field,
    generate,
    import_field,
    region_centers,
    regions_within,
    sample,
    uniform,
)
from src.environment.perlin import PerlinNoise


@pytest.mark.parametrize("d, count", [(100.0, 100), (200.0, 400)])
def test_region_count(d, count):
    assert generate(0, d=d).n_m == count


def test_field_spans_unit_interval():
    field = generate(11)
    assert field.truth.min() == pytest.approx(0.0)
    assert field.truth.max() == pytest.approx(1.0)


def test_same_seed_same_field():
    np.testing.assert_array_equal(generate(5).truth, generate(5).truth)
    assert not np.array_equal(generate(5).truth, generate(6).truth)


def test_perlin_is_deterministic_and_bounded():
    x = np.linspace(0, 3, 50)
    a = PerlinNoise(9).noise(x, x[::-1])
    np.testing.assert_array_equal(a, PerlinNoise(9).noise(x, x[::-1]))
    assert np.all(np.abs(a) <= 1.5)


def test_indivisible_grid_rejected():
    with pytest.raises(FieldError):
        region_centers(45.0, 10.0)
    with pytest.raises(FieldError):
        generate(0, d=45.0)


def test_centres_are_row_major():
    centers = region_centers(40.0, 10.0)
    np.testing.assert_allclose(centers[0], [5.0, 5.0])
    np.testing.assert_allclose(centers[1], [15.0, 5.0])
    np.testing.assert_allclose(centers[4], [5.0, 15.0])


@pytest.mark.parametrize("pos, radius, expected", [
    ((5.0, 5.0), 0.0, [0]),
    ((5.0, 5.0), 10.0, [0, 1, 4]),
    ((20.0, 20.0), 7.08, [5, 6, 9, 10]),
    ((20.0, 20.0), 7.0, []),
])
def test_regions_within(pos, radius, expected):
    assert regions_within(uniform(40.0, 10.0, 0.5), np.array(pos), radius) == expected


def test_negative_radius_rejected():
    with pytest.raises(FieldError):
        regions_within(uniform(40.0, 10.0, 0.5), np.zeros(2), -1.0)


def test_noiseless_sample_reads_truth(rng):
    field = generate(2, d=40.0)
    samples = sample(field, np.array([15.0, 15.0]), 10.0, 0.0, rng)
    assert [s.region for s in samples] == [1, 4, 5, 6, 9]
    for s in samples:
        assert s.psi_noisy == field.truth[s.region]
        np.testing.assert_array_equal(s.position, field.centers[s.region])


def test_sample_noise_has_requested_spread():
    field = generate(3)
    rng = np.random.default_rng(0)
    residuals = []
    for _ in range(1000):
        residuals.extend(s.psi_noisy - field.truth[s.region] for s in sample(field, np.array([50.0, 50.0]), 100.0, 0.1, rng))
    assert len(residuals) == 100_000
    assert np.std(residuals) == pytest.approx(0.1, rel=0.01)


def test_no_regions_in_range(rng):
    assert sample(uniform(40.0, 10.0, 0.5), np.array([-50.0, -50.0]), 5.0, 0.1, rng) == []


def test_export_import(tmp_path):
    field = generate(4, d=40.0)
    back = import_field(export_field(field, tmp_path / "field.txt"))
    assert (back.d, back.r_d, back.seed) == (40.0, 10.0, 4)
    np.testing.assert_allclose(back.truth, field.truth, atol=1e-6)


def test_import_rejects_bad_grid(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("D=20 r_D=10 seed=0\n0.1 0.2\n0.3\n")
    with pytest.raises(FieldError):
        import_field(path)
    path.write_text("D=20 r_D=10 seed=0\n0.1 2.0\n0.3 0.4\n")
    with pytest.raises(FieldError):
        import_field(path)


def test_field_contains_a_source():
    psi_star = 10 / 255
    field = generate(8, psi_star=psi_star)
    assert field.truth.min() < psi_star
    assert field.attempt == 0


def test_truth_is_read_only():
    field = generate(1, d=40.0)
    with pytest.raises(ValueError):
        field.truth[0] = 0.5
    with pytest.raises(FieldError):
        field.check_region(16)
