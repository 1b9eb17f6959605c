"""Acceptance suite: correctness, trend and determinism criteria.

Each test prints one PASS line with the measured quantity so the suite reads
as a checklist under `pytest -v -s`.
"""

import dataclasses
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import TableScorer
from prospero.campaign import (
    AblationFlags,
    CampaignConfig,
    run_campaign,
)
from prospero.landscapes import (
    NkLandscape,
    NoisyOracleConfig,
    NoisyOracleEnsemble,
    seed_dataset,
)
from prospero.masking import MaskingConfig
from prospero.metrics import metrics_report
from prospero.priors import ProfilePrior, UniformPrior, fit_profile_prior, sequence_perplexity
from prospero.seqs import ALPHABET, AA_INDEX, MaskedSequence, charge_class, hamming
from prospero.smc import SmcConfig, brute_force_posterior, constrained_smc, rollout
from prospero.smc import Particle
from prospero.seqs import build_permutation
from prospero.surrogate import (
    TrainingConfig,
    init_params,
    mlp_loss_and_grad,
)

HERE = Path(__file__).parent


def total_variation(empirical: dict, exact: dict) -> float:
    keys = set(empirical) | set(exact)
    return 0.5 * sum(abs(empirical.get(k, 0.0) - exact.get(k, 0.0)) for k in keys)


def counts_to_dist(seqs):
    n = len(seqs)
    out = {}
    for s in seqs:
        out[s] = out.get(s, 0.0) + 1.0 / n
    return out


def random_wild_type(length, rng):
    return "".join(ALPHABET[i] for i in rng.integers(0, 20, size=length))


# ---------------------------------------------------------------------------
# SMC exactness


class TestSmcSingleStepExactness:
    def test_single_step_tv(self):
        """Post-resample distribution vs exact posterior, |I| = 1, B = 5000."""
        start = time.monotonic()
        b = 5000
        wt = "GKDWCASG"  # masked position 5 is S, neutral (15-way support)
        masked = MaskedSequence.from_positions(wt, (5,))
        table_rng = np.random.default_rng(99)
        f = {}
        for aa in ALPHABET:
            f[wt[:5] + aa + wt[6:]] = float(0.5 + table_rng.random())
        scorer = TableScorer(f)
        exact, _ = brute_force_posterior(lambda s: f[s], UniformPrior(), masked, wt)

        tvs = []
        cfg_base = SmcConfig(particle_count_b=b, oracle_budget_k=10, seed=0)
        for seed in range(20):
            cfg = dataclasses.replace(cfg_base, seed=seed)
            res = constrained_smc([masked] * b, wt, UniformPrior(), scorer, cfg)
            tvs.append(total_variation(counts_to_dist(res.final_population), exact))
        mean_tv = float(np.mean(tvs))
        elapsed = time.monotonic() - start
        assert mean_tv <= 0.05
        assert elapsed < 10.0
        print(f"PASS single-step exactness: mean TV {mean_tv:.4f} over 20 seeds "
              f"(limit 0.05), {elapsed:.1f}s (limit 10s)")

    def test_multi_step_tv(self):
        """Final population vs brute-force target, |I| = 3 over 4 residues."""
        start = time.monotonic()
        b = 2000
        wt = "GSGTGVG"  # positions 1, 3, 5 masked, all neutral
        positions = (1, 3, 5)
        masked = MaskedSequence.from_positions(wt, positions)
        # prior confined to 4 neutral residues, uniform over them
        sub = "GSTV"
        probs = np.zeros(20)
        for aa in sub:
            probs[AA_INDEX[aa]] = 0.25
        with np.errstate(divide="ignore"):
            prior = ProfilePrior(np.log(probs)[None, :].repeat(len(wt), axis=0))

        table_rng = np.random.default_rng(17)
        f = {}
        for a in sub:
            for c in sub:
                for e in sub:
                    seq = wt[0] + a + wt[2] + c + wt[4] + e + wt[6]
                    f[seq] = float(0.5 + table_rng.random())
        scorer = TableScorer(f)
        exact, _ = brute_force_posterior(lambda s: f[s], prior, masked, wt)

        pooled = []
        for seed in range(5):
            cfg = SmcConfig(particle_count_b=b, oracle_budget_k=10, seed=seed)
            res = constrained_smc([masked] * b, wt, prior, scorer, cfg)
            pooled.extend(res.final_population)
        tv = total_variation(counts_to_dist(pooled), exact)
        elapsed = time.monotonic() - start
        assert tv <= 0.15
        assert elapsed < 60.0
        print(f"PASS multi-step sanity: TV {tv:.4f} (limit 0.15), "
              f"{elapsed:.1f}s (limit 60s)")


# ---------------------------------------------------------------------------
# Full-campaign audits (shared fixture: N=10, K=128, B=256 on NK L=50 k=2)


@pytest.fixture(scope="module")
def audit_campaign():
    oracle = NkLandscape(50, 2, seed=21)
    rng = np.random.default_rng(77)
    x0 = random_wild_type(50, rng)
    data = seed_dataset(oracle, x0, 200, 5, rng)
    prior = fit_profile_prior(data.sequences)
    cfg = CampaignConfig(
        rounds_n=10,
        oracle_budget_k=128,
        masking=MaskingConfig(batch_b=256, scans_s=16),
        smc=SmcConfig(particle_count_b=256),
        surrogate=TrainingConfig(max_updates=600),
        seed=5,
    )
    result = run_campaign(cfg, oracle, prior, data)
    return result


class TestCampaignAudits:
    def test_charge_constraint_audit(self, audit_campaign):
        checked = 0
        for rt in audit_campaign.rounds:
            for cand in rt.candidates:
                for i, ch in enumerate(cand["sequence"]):
                    if ch != rt.x_start[i]:
                        assert charge_class(ch) is charge_class(rt.x_start[i])
                        checked += 1
        assert checked > 0
        print(f"PASS constraint audit: {checked} substituted positions, "
              f"0 charge-class violations over N=10, K=128, B=256")

    def test_budget_audit(self, audit_campaign):
        total = audit_campaign.total_oracle_calls
        assert total <= 10 * 128
        per_round = [rt.oracle_calls_cumulative for rt in audit_campaign.rounds]
        assert per_round == sorted(per_round)
        assert per_round[-1] == total
        bests = [rt.best_so_far for rt in audit_campaign.rounds]
        assert bests == sorted(bests)
        print(f"PASS budget audit: {total} oracle calls <= 1280, "
              f"best-so-far non-decreasing over rounds")


# ---------------------------------------------------------------------------
# Improvement property


class TestImprovementProperty:
    def test_improvement_over_start(self):
        """Additive landscape, known optimum, D0 of 500 near-start mutants."""
        start = time.monotonic()
        oracle = NkLandscape(30, 0, seed=8)
        _, opt_value = oracle.optimum()
        improved = 0
        ratios = []
        for seed in range(5):
            rng = np.random.default_rng(1000 + seed)
            x0 = random_wild_type(30, rng)
            data = seed_dataset(oracle, x0, 500, 5, rng)
            y0 = oracle.raw_fitness(x0)
            prior = fit_profile_prior(data.sequences)
            cfg = CampaignConfig(
                rounds_n=10,
                oracle_budget_k=128,
                masking=MaskingConfig(batch_b=256, scans_s=16),
                smc=SmcConfig(particle_count_b=256),
                surrogate=TrainingConfig(max_updates=600),
                seed=seed,
            )
            result = run_campaign(cfg, oracle, prior, data)
            best = max(result.dataset.fitness)
            if best > y0:
                improved += 1
            ratios.append((best - y0) / (opt_value - y0))
        mean_ratio = float(np.mean(ratios))
        elapsed = time.monotonic() - start
        assert improved >= 4
        assert mean_ratio >= 0.60
        assert elapsed < 300.0
        print(f"PASS improvement property: improved in {improved}/5 seeds, "
              f"mean gap ratio {mean_ratio:.2f} (target >= 0.60), "
              f"{elapsed:.0f}s (limit 300s)")


# ---------------------------------------------------------------------------
# Noise robustness and ablation ordering (shared noisy-campaign machinery)


def run_noisy_campaign(
    oracle,
    snr_db,
    seed,
    flags=AblationFlags(),
    rounds=5,
    k=32,
    b=64,
    scans=4,
    n_min=None,
    n_max=None,
):
    rng = np.random.default_rng(2000 + seed)
    x0 = random_wild_type(oracle.length, rng)
    data = seed_dataset(oracle, x0, 100, 5, rng)
    prior = fit_profile_prior(data.sequences)
    var0 = float(np.var(data.fitness_array()))
    ensemble = NoisyOracleEnsemble(
        oracle, snr_db=snr_db, base_variance=var0, seed=9000 + seed, members=3
    )
    cfg = CampaignConfig(
        rounds_n=rounds,
        oracle_budget_k=k,
        masking=MaskingConfig(batch_b=b, scans_s=scans, n_min=n_min, n_max=n_max),
        smc=SmcConfig(particle_count_b=b),
        ablation=flags,
        seed=seed,
    )
    result = run_campaign(cfg, oracle, prior, data, scorer_factory=lambda d, n: ensemble)
    return max(result.dataset.fitness)


@pytest.fixture(scope="module")
def noise_sweep_results():
    oracle = NkLandscape(50, 2, seed=21)
    snrs = [-20, -10, 0, 10, 20, 60]
    table = {snr: [run_noisy_campaign(oracle, snr, s) for s in range(5)] for snr in snrs}
    return snrs, table


class TestNoiseRobustness:
    def test_sigma_formula(self):
        assert NoisyOracleConfig(snr_db=0.0, base_variance=4.0).sigma == 2.0
        cfg = NoisyOracleConfig(snr_db=10.0, base_variance=1.0)
        assert abs(cfg.sigma - 10 ** (-0.5)) < 1e-12
        print("PASS noise-scale formula: sigma(0 dB, Var 4) = 2 exactly; "
              "sigma(10 dB, Var 1) = 10^(-1/2) within 1e-12")

    def test_trend(self, noise_sweep_results):
        start = time.monotonic()
        snrs, table = noise_sweep_results
        means = {snr: float(np.mean(table[snr])) for snr in snrs}
        assert means[60] > means[-20]
        for lo, hi in zip(snrs, snrs[1:]):
            a, b = np.array(table[lo]), np.array(table[hi])
            pooled_se = math.sqrt(a.var(ddof=1) / len(a) + b.var(ddof=1) / len(b))
            assert means[hi] >= means[lo] - pooled_se
        summary = ", ".join(f"{snr}dB:{means[snr]:.3f}" for snr in snrs)
        print(f"PASS noise trend: {summary}; 60dB > -20dB and adjacent steps "
              f"non-decreasing within one pooled SE")
        assert time.monotonic() - start < 900.0

    def test_ablation_ordering(self):
        # calibrated regime: SMC resampling and targeted masking only pay off
        # once mask sets are large enough that blind prior rollouts rarely hit
        # good completions; 15-20 masked sites out of 50, B=256 particles
        oracle = NkLandscape(50, 2, seed=21)
        shape = dict(rounds=10, k=64, b=256, scans=8, n_min=15, n_max=20)
        full = np.array(
            [run_noisy_campaign(oracle, 60, s, **shape) for s in range(5)]
        )
        variant_iv = np.array(
            [
                run_noisy_campaign(
                    oracle, 60, s, flags=AblationFlags(False, False, False), **shape
                )
                for s in range(5)
            ]
        )
        pooled_se = math.sqrt(full.var(ddof=1) / 5 + variant_iv.var(ddof=1) / 5)
        gap = float(full.mean() - variant_iv.mean())
        assert gap >= pooled_se
        print(f"PASS ablation ordering: full {full.mean():.3f} vs variant(iv) "
              f"{variant_iv.mean():.3f}, gap {gap:.3f} >= pooled SE {pooled_se:.3f}")


# ---------------------------------------------------------------------------
# Analytic identities


class TestIdentities:
    def test_perplexity_identities(self):
        # uniform prior: perplexity 20
        for k in (1, 4, 9):
            assert abs(sequence_perplexity(k * math.log(1 / 20), k) - 20.0) < 1e-9
        # one-hot prior: perplexity 1
        assert sequence_perplexity(0.0, 6) == 1.0
        # invPPL . Perp = 1 on 1000 random rollouts
        rng = np.random.default_rng(3)
        prior = fit_profile_prior(
            [random_wild_type(10, rng) for _ in range(40)]
        )
        checked = 0
        for trial in range(1000):
            wt = random_wild_type(10, rng)
            k = int(rng.integers(1, 6))
            pos = tuple(sorted(rng.choice(10, size=k, replace=False).tolist()))
            masked = MaskedSequence.from_positions(wt, pos)
            order = build_permutation(masked, wt).masked_order
            classes = tuple(charge_class(wt[p]) for p in order)
            particle = Particle(
                slots=list(masked.slots), mask_order=order, classes=classes
            )
            (_, ll), = rollout(
                [particle], prior, lambda i, t=trial: np.random.default_rng(t)
            )
            inv_ppl = math.exp(ll / k)
            assert abs(inv_ppl * sequence_perplexity(ll, k) - 1.0) < 1e-9
            checked += 1
        print(f"PASS perplexity identities: uniform=20, one-hot=1, "
              f"invPPL*Perp=1 on {checked} rollouts within 1e-9")

    def test_gradient_check(self):
        rng = np.random.default_rng(7)
        worst = 0.0
        for trial in range(50):
            n_in = int(rng.integers(4, 16))
            hidden = int(rng.integers(3, 10))
            params = init_params(n_in, hidden, np.random.default_rng(trial))
            X = rng.normal(size=(int(rng.integers(2, 6)), n_in))
            y = rng.normal(size=X.shape[0])
            _, grads = mlp_loss_and_grad(params, X, y, l2=1e-3)
            eps = 1e-6
            for key in ("W1", "b1", "W2"):
                flat = params[key].ravel()
                g = np.asarray(grads[key]).ravel()
                for j in rng.choice(flat.size, size=min(3, flat.size), replace=False):
                    orig = flat[j]
                    flat[j] = orig + eps
                    up, _ = mlp_loss_and_grad(params, X, y, l2=1e-3)
                    flat[j] = orig - eps
                    dn, _ = mlp_loss_and_grad(params, X, y, l2=1e-3)
                    flat[j] = orig
                    numeric = (up - dn) / (2 * eps)
                    rel = abs(numeric - g[j]) / max(abs(numeric), abs(g[j]), 1e-8)
                    worst = max(worst, rel)
        assert worst < 1e-4
        print(f"PASS gradient check: worst relative error {worst:.2e} < 1e-4 "
              f"over 50 random networks")

    def test_metrics_oracle_equivalence(self):
        rng = np.random.default_rng(11)
        for trial in range(20):
            seqs = [random_wild_type(8, rng) for _ in range(10)]
            x0 = random_wild_type(8, rng)
            records = [(s, float(i)) for i, s in enumerate(seqs)]
            rep = metrics_report(records, x0)
            novelty_sum = sum(hamming(s, x0) for s in seqs)
            pair = [
                hamming(seqs[i], seqs[j])
                for i in range(10)
                for j in range(i + 1, 10)
            ]
            assert rep["novelty"] == novelty_sum / 10
            assert rep["diversity"] == sum(pair) / 45
        print("PASS metrics equivalence: novelty/diversity equal independent "
              "double-loop Hamming sums on 20 random sets")


# ---------------------------------------------------------------------------
# End-to-end determinism through the CLI


class TestDeterminism:
    def test_byte_identical_reports(self, tmp_path):
        config = HERE / "acceptance_config.yaml"
        reports = []
        for sub in ("first", "second"):
            out = tmp_path / sub
            proc = subprocess.run(
                [
                    sys.executable, "-m", "prospero.cli", "run",
                    "--config", str(config), "--seed", "7", "--out", str(out),
                ],
                capture_output=True,
                text=True,
            )
            assert proc.returncode == 0, proc.stderr
            reports.append((out / "report.json").read_bytes())
        assert reports[0] == reports[1]
        print("PASS determinism: two `run --seed 7` invocations produced "
              "byte-identical report.json")
