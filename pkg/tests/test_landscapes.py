"""NK and table landscapes, the noisy-oracle wrapper, initial datasets."""

import math

import numpy as np
import pytest

from prospero.errors import (
    InvalidK,
    NegativeVariance,
    ParseError,
    UnknownSequence,
)
from prospero.landscapes import (
    NkLandscape,
    NoisyOracle,
    NoisyOracleConfig,
    NoisyOracleEnsemble,
    TableLandscape,
    seed_dataset,
)
from prospero.seqs import ALPHABET, AA_INDEX, hamming


def random_seqs(n, length, rng):
    return [
        "".join(ALPHABET[i] for i in rng.integers(0, 20, size=length))
        for _ in range(n)
    ]


class TestNkLandscape:
    def test_k0_additive_definition(self):
        land = NkLandscape(2, 0, seed=0)
        a = AA_INDEX["A"]
        expected = (land.tables[0, a] + land.tables[1, a]) / 2
        assert land.raw_fitness("AA") == pytest.approx(expected)

    def test_determinism_across_instances(self):
        a = NkLandscape(12, 2, seed=7)
        b = NkLandscape(12, 2, seed=7)
        probes = random_seqs(100, 12, np.random.default_rng(0))
        assert np.array_equal(a.raw_batch(probes), b.raw_batch(probes))

    def test_full_epistasis(self):
        """k = L-1: one substitution can move every site contribution."""
        land = NkLandscape(4, 3, seed=1)
        x = "ACDE"
        y = "CCDE"
        per_site_changed = []
        for site in range(4):
            codes_x = np.array([AA_INDEX[c] for c in x])[land.neighbors[site]]
            codes_y = np.array([AA_INDEX[c] for c in y])[land.neighbors[site]]
            ix = int(codes_x @ land._powers)
            iy = int(codes_y @ land._powers)
            per_site_changed.append(land.tables[site, ix] != land.tables[site, iy])
        assert all(per_site_changed)

    def test_query_accounting(self):
        land = NkLandscape(6, 1, seed=0)
        land.evaluate("ACDEAC")
        land.evaluate_batch(["ACDEAC", "CCDEAC"])
        assert land.query_count == 3
        # raw access is free
        land.raw_fitness("ACDEAC")
        assert land.query_count == 3

    def test_invalid_k(self):
        with pytest.raises(InvalidK):
            NkLandscape(5, 5, seed=0)
        with pytest.raises(InvalidK):
            NkLandscape(5, -1, seed=0)

    def test_k0_optimum_is_exact(self):
        land = NkLandscape(4, 0, seed=3)
        seq, value = land.optimum()
        assert land.raw_fitness(seq) == pytest.approx(value)
        # no single substitution improves an additive optimum
        for i in range(4):
            for aa in ALPHABET:
                mutant = seq[:i] + aa + seq[i + 1 :]
                assert land.raw_fitness(mutant) <= value + 1e-12

    def test_optimum_requires_k0(self):
        with pytest.raises(InvalidK):
            NkLandscape(5, 1, seed=0).optimum()

    def test_json_round_trip(self):
        land = NkLandscape(8, 2, seed=11)
        back = NkLandscape.from_json(land.to_json())
        probes = random_seqs(20, 8, np.random.default_rng(1))
        assert np.array_equal(land.raw_batch(probes), back.raw_batch(probes))


class TestTableLandscape:
    def _csv(self, tmp_path, rows, header="sequence,fitness"):
        path = tmp_path / "table.csv"
        path.write_text(header + "\n" + "\n".join(rows) + "\n")
        return path

    def test_lookup(self, tmp_path):
        path = self._csv(tmp_path, ["AA,1.0", "AC,2.0"])
        land = TableLandscape.from_csv(path)
        assert land.evaluate("AC") == 2.0

    def test_unknown_sequence(self, tmp_path):
        path = self._csv(tmp_path, ["AA,1.0", "AC,2.0"])
        land = TableLandscape.from_csv(path)
        with pytest.raises(UnknownSequence):
            land.evaluate("AD")

    def test_conflicting_duplicate(self, tmp_path):
        path = self._csv(tmp_path, ["AA,1.0", "AA,2.0"])
        with pytest.raises(ParseError):
            TableLandscape.from_csv(path)

    def test_consistent_duplicate_allowed(self, tmp_path):
        path = self._csv(tmp_path, ["AA,1.0", "AA,1.0"])
        assert TableLandscape.from_csv(path).evaluate("AA") == 1.0

    def test_bad_header(self, tmp_path):
        path = self._csv(tmp_path, ["AA,1.0"], header="seq,score")
        with pytest.raises(ParseError):
            TableLandscape.from_csv(path)


class TestNoisyOracle:
    def test_sigma_formula_snr0(self):
        assert NoisyOracleConfig(snr_db=0.0, base_variance=4.0).sigma == 2.0

    def test_sigma_formula_snr10(self):
        cfg = NoisyOracleConfig(snr_db=10.0, base_variance=1.0)
        assert cfg.sigma == pytest.approx(10 ** (-0.5), abs=1e-12)

    def test_high_snr_limit(self):
        base = NkLandscape(4, 0, seed=0)
        noisy = NoisyOracle(base, NoisyOracleConfig(snr_db=600.0, base_variance=1.0, seed=0))
        probes = ["ACDE", "CDEA"]
        assert np.allclose(noisy.raw_batch(probes), np.maximum(base.raw_batch(probes), 0.0))

    def test_truncation_at_zero(self):
        class Negative(NkLandscape):
            def raw_batch(self, seqs):
                return np.full(len(seqs), -3.0)

        base = Negative(4, 0, seed=0)
        noisy = NoisyOracle(base, NoisyOracleConfig(snr_db=40.0, base_variance=1.0, seed=0))
        assert noisy.raw_fitness("ACDE") == 0.0

    def test_negative_variance(self):
        with pytest.raises(NegativeVariance):
            NoisyOracleConfig(snr_db=0.0, base_variance=-1.0).sigma

    def test_noise_statistics(self):
        """Empirical mean/std of the injected noise at base >> sigma."""

        class Flat(NkLandscape):
            def raw_batch(self, seqs):
                return np.full(len(seqs), 100.0)

        base = Flat(4, 0, seed=0)
        cfg = NoisyOracleConfig(snr_db=20.0, base_variance=4.0, seed=3)
        noisy = NoisyOracle(base, cfg)
        n = 100_000
        draws = noisy.raw_batch(["ACDE"] * n)
        assert abs(draws.mean() - 100.0) < 3 * cfg.sigma / math.sqrt(n)
        assert abs(draws.std() - cfg.sigma) < 3 * cfg.sigma / math.sqrt(2 * n)


class TestNoisyEnsemble:
    def test_members_have_independent_streams(self):
        base = NkLandscape(6, 0, seed=0)
        ens = NoisyOracleEnsemble(base, snr_db=0.0, base_variance=1.0, seed=5, members=3)
        mu, sigma = ens.predict_batch(["ACDEAC"])
        assert sigma[0] > 0.0  # members disagree, so std is meaningful

    def test_interface_matches_surrogate(self):
        base = NkLandscape(6, 0, seed=0)
        ens = NoisyOracleEnsemble(base, snr_db=60.0, base_variance=1.0, seed=5)
        mu, sigma = ens.predict_batch(["ACDEAC", "CDEACA"])
        assert mu.shape == (2,) and sigma.shape == (2,)
        m, s = ens.predict("ACDEAC")
        assert isinstance(m, float) and isinstance(s, float)


class TestSeedDataset:
    def test_singleton(self):
        land = NkLandscape(5, 0, seed=0)
        data = seed_dataset(land, "ACDEA", 1, 3, np.random.default_rng(0))
        assert data.sequences == ["ACDEA"]
        assert data.fitness[0] == pytest.approx(land.raw_fitness("ACDEA"))
        assert data.rounds == [0]

    def test_mutation_bound(self):
        land = NkLandscape(10, 0, seed=0)
        x = "ACDEACDEAC"
        data = seed_dataset(land, x, 50, 4, np.random.default_rng(1))
        assert len(data) == 50
        assert len(set(data.sequences)) == 50
        for s in data.sequences[1:]:
            assert 1 <= hamming(s, x) <= 4

    def test_variance_double_computation(self):
        land = NkLandscape(10, 0, seed=0)
        data = seed_dataset(land, "ACDEACDEAC", 100, 4, np.random.default_rng(2))
        var_np = float(np.var(data.fitness_array()))
        mean = sum(data.fitness) / len(data)
        var_manual = sum((y - mean) ** 2 for y in data.fitness) / len(data)
        assert abs(var_np - var_manual) < 1e-12
