"""Aggregation profile, microaggregation, bootstrap, rounding, full pipeline."""

import math

import numpy as np
import pytest

from microsynth.anonymous import (
    AnonymousSynthesizer,
    aggregation_profile,
    bootstrap,
    generate_anonymous,
    microaggregate,
    randomized_round,
)


def test_profile_frozen_values():
    nine = aggregation_profile(9)
    assert nine.base == 3
    assert nine.alpha == 0.99
    assert nine.rank == 0

    eighty_one = aggregation_profile(81)
    assert eighty_one.base == 9
    assert eighty_one.alpha == 0.99
    assert eighty_one.rank == 1

    big = aggregation_profile(256)
    assert big.base == 16
    assert big.alpha == pytest.approx(0.7787631853883198, abs=1e-12)
    assert big.rank == 1

    assert aggregation_profile(1).rank == 0
    with pytest.raises(ValueError):
        aggregation_profile(0)


def test_microaggregate_singleton_blocks():
    rows = np.array([[1.0, 0.0], [0.0, 1.0]])
    result = microaggregate(rows, 2)
    assert result.anonymity_level == 1
    assert result.blocks.num_blocks == 2
    # with blocks of size one the centroids are the rows themselves
    order = np.argsort([b[0] for b in result.blocks.blocks])
    assert np.allclose(result.centroids[order], rows)


def test_microaggregate_single_block_mean():
    rows = np.array([[1.0, 0.0], [0.0, 1.0]])
    result = microaggregate(rows, 1)
    assert result.blocks.num_blocks == 1
    assert np.allclose(result.centroids, [[0.5, 0.5]])


def test_microaggregate_identical_rows():
    row = np.array([0.4, 0.2, 0.1])
    rows = np.tile(row, (6, 1))
    result = microaggregate(rows, 3)
    assert np.allclose(result.centroids, np.tile(row, (3, 1)))


def test_microaggregate_preserves_mean_and_sizes():
    rng = np.random.default_rng(0)
    for k in (9, 27, 81):
        data = (rng.random((162, 8)) < 0.4).astype(np.float64)
        scaled = data / math.sqrt(8)
        result = microaggregate(scaled, k)
        assert all(b.size == 162 // k for b in result.blocks.blocks)
        assert result.anonymity_level == 162 // k
        assert np.allclose(
            scaled.mean(axis=0), result.centroids.mean(axis=0), atol=1e-12
        )


def test_microaggregate_input_validation():
    big = np.full((4, 4), 0.9)  # row norms 1.8
    with pytest.raises(ValueError):
        microaggregate(big, 2)
    ok = np.eye(4)
    with pytest.raises(ValueError):
        microaggregate(ok, 3)  # 3 does not divide 4
    with pytest.raises(ValueError):
        microaggregate(ok, 0)


def test_pipeline_rejects_small_k():
    data = np.zeros((20, 3))
    with pytest.raises(ValueError, match="k >= 9"):
        AnonymousSynthesizer(k=4).fit(data)


def test_bootstrap_behaviour():
    rng = np.random.default_rng(1)
    atom = np.array([[0.2, 0.8]])
    out = bootstrap(atom, 7, rng)
    assert np.array_equal(out, np.tile(atom, (7, 1)))

    two = np.array([[1.0, 0.0], [0.0, 1.0]])
    picked = bootstrap(two, 500, rng, weights=np.array([1.0, 0.0]))
    assert np.array_equal(picked, np.tile(two[0], (500, 1)))

    four = np.eye(4)
    sample = bootstrap(four, 10**5, rng)
    freqs = sample.mean(axis=0)  # one-hot atoms: column means are frequencies
    assert np.abs(freqs - 0.25).max() < 4.0 * math.sqrt(0.25 * 0.75 / 10**5)


def test_bootstrap_validation():
    rng = np.random.default_rng(2)
    atoms = np.eye(2)
    with pytest.raises(ValueError):
        bootstrap(atoms, 0, rng)
    with pytest.raises(ValueError):
        bootstrap(atoms, 5, rng, weights=np.array([1.0]))
    with pytest.raises(ValueError):
        bootstrap(atoms, 5, rng, weights=np.array([-0.5, 1.5]))
    with pytest.raises(ValueError):
        bootstrap(atoms, 5, rng, weights=np.array([0.4, 0.4]))


def test_randomized_round_endpoints_are_exact():
    rng = np.random.default_rng(3)
    binary = (np.random.default_rng(4).random((40, 6)) < 0.5).astype(np.float64)
    for _ in range(20):
        assert np.array_equal(randomized_round(binary, rng), binary)
    # tiny numerical slop at the endpoints is tolerated
    nudged = np.array([[1.0 + 5e-13, -5e-13]])
    out = randomized_round(nudged, rng)
    assert np.array_equal(out, [[1.0, 0.0]])


def test_randomized_round_is_unbiased():
    rng = np.random.default_rng(5)
    probs = np.full((10**5, 1), 0.3)
    mean = float(randomized_round(probs, rng).mean())
    assert abs(mean - 0.3) < 4.0 * math.sqrt(0.3 * 0.7 / 10**5)


def test_randomized_round_coordinates_independent():
    rng = np.random.default_rng(6)
    rows = np.full((10**5, 2), 0.5)
    out = randomized_round(rows, rng)
    pair_rate = float((out[:, 0] * out[:, 1]).mean())
    assert abs(pair_rate - 0.25) < 4.0 * math.sqrt(0.25 * 0.75 / 10**5)


def test_randomized_round_validation():
    rng = np.random.default_rng(7)
    with pytest.raises(ValueError):
        randomized_round(np.array([[1.1]]), rng)
    with pytest.raises(ValueError):
        randomized_round(np.array([[-0.1]]), rng)
    out = randomized_round(np.array([[0.25, 0.75]]), rng)
    assert set(np.unique(out)) <= {0.0, 1.0}


def test_constant_dataset_reproduced_exactly():
    row = np.array([1.0, 0.0, 1.0, 0.0, 1.0])
    data = np.tile(row, (18, 1))
    result = generate_anonymous(data, k=9, m=18, seed=11)
    assert np.array_equal(result.dataset.rows, data)
    for deg, err in result.report.by_degree.items():
        assert err.avg_sym_sq == 0.0, f"degree {deg}"
        assert err.worst_entry == 0.0, f"degree {deg}"


def test_pipeline_reproducibility():
    rng = np.random.default_rng(8)
    data = (rng.random((180, 8)) < 0.35).astype(np.float64)
    synth = AnonymousSynthesizer(k=9, random_state=21).fit(data)
    again = AnonymousSynthesizer(k=9, random_state=21).fit(data)
    assert np.array_equal(synth.sample(50), again.sample(50))
    assert not np.array_equal(synth.sample(50), synth.sample(50, random_state=22))
    direct = AnonymousSynthesizer(k=9, random_state=21).fit_sample(data, 50)
    assert np.array_equal(direct, synth.sample(50))


def test_pipeline_output_and_manifest():
    rng = np.random.default_rng(9)
    data = (rng.random((180, 8)) < 0.35).astype(np.float64)
    result = generate_anonymous(data, k=9, m=120, degrees=(1, 2), seed=5)
    rows = result.dataset.rows
    assert rows.shape == (120, 8)
    assert set(np.unique(rows)) <= {0.0, 1.0}
    manifest = result.manifest
    for key in (
        "mode",
        "n",
        "p",
        "k",
        "m",
        "seed",
        "degrees",
        "alpha",
        "rank",
        "covering_size",
        "anonymity_level",
        "stage_seconds",
    ):
        assert key in manifest, key
    assert manifest["mode"] == "anonymous"
    assert manifest["anonymity_level"] == 20
    assert sorted(result.report.by_degree) == [1, 2]
    assert result.dataset.provenance["seed"] == 5
    # estimator params survive the sklearn get_params contract
    params = AnonymousSynthesizer(k=9, m=3).get_params()
    assert params["k"] == 9 and params["m"] == 3
