"""Siamese pair sampling and the contrastive pair objective."""

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from crossvocal.bcst import (
    BCSTConfig,
    bcst_total,
    eligible_speakers,
    pair_loss,
    sample_pairs,
)
from crossvocal.ddal import LossError

from conftest import make_manifest
from test_model import assert_close_rel, central_diff_grad


def two_domain_manifest(n_speakers=4, per_domain=3, holdout=None):
    """Speakers sNN with utterances in both domains; ``holdout`` speakers
    get stage speech only."""
    entries = []
    for i in range(n_speakers):
        spk = f"s{i:02d}"
        entries.append((f"{spk}_st0", spk, "ST"))
        for j in range(1, per_domain):
            entries.append((f"{spk}_st{j}", spk, "ST"))
        if holdout and spk in holdout:
            continue
        for j in range(per_domain):
            entries.append((f"{spk}_s{j}", spk, "S"))
    return make_manifest(entries)


class TestEligibleSpeakers:
    def test_requires_both_domains(self):
        m = two_domain_manifest(4, holdout={"s01", "s03"})
        assert eligible_speakers(m) == ["s00", "s02"]

    def test_sorted_output(self):
        m = make_manifest(
            [("a", "zz", "ST"), ("b", "zz", "S"), ("c", "aa", "S"), ("d", "aa", "ST")]
        )
        assert eligible_speakers(m) == ["aa", "zz"]

    def test_empty_when_single_domain(self):
        m = make_manifest([("a", "x", "ST"), ("b", "y", "ST")])
        assert eligible_speakers(m) == []


class TestSamplePairs:
    def test_pairs_are_same_speaker_cross_domain(self):
        m = two_domain_manifest(5)
        pairs = sample_pairs(m, 32, np.random.default_rng(0))
        assert len(pairs) == 32
        for st_rec, s_rec in pairs:
            assert st_rec.speaker_id == s_rec.speaker_id
            assert st_rec.domain == "ST"
            assert s_rec.domain == "S"

    def test_single_domain_speakers_never_sampled(self):
        m = two_domain_manifest(4, holdout={"s02"})
        pairs = sample_pairs(m, 64, np.random.default_rng(1))
        assert all(p[0].speaker_id != "s02" for p in pairs)

    def test_deterministic_under_seed(self):
        m = two_domain_manifest(5)
        a = sample_pairs(m, 16, np.random.default_rng(7))
        b = sample_pairs(m, 16, np.random.default_rng(7))
        assert [(x.utt_id, y.utt_id) for x, y in a] == [(x.utt_id, y.utt_id) for x, y in b]

    def test_all_eligible_speakers_eventually_drawn(self):
        m = two_domain_manifest(5)
        pairs = sample_pairs(m, 256, np.random.default_rng(2))
        assert {p[0].speaker_id for p in pairs} == set(eligible_speakers(m))

    def test_no_eligible_speaker_rejected(self):
        m = make_manifest([("a", "x", "ST"), ("b", "y", "S")])
        with pytest.raises(ValueError):
            sample_pairs(m, 4, np.random.default_rng(0))

    def test_bad_batch_size_rejected(self):
        with pytest.raises(ValueError):
            sample_pairs(two_domain_manifest(), 0, np.random.default_rng(0))


class TestPairLoss:
    def test_identical_embeddings_cost_zero(self):
        z = torch.randn(4, 8)
        assert pair_loss(z, z.clone()).item() == pytest.approx(0.0, abs=1e-6)

    def test_antipodal_embeddings_cost_two(self):
        z = torch.randn(4, 8)
        assert pair_loss(z, -z).item() == pytest.approx(2.0, abs=1e-6)

    def test_orthogonal_embeddings_cost_one(self):
        a = torch.tensor([[1.0, 0.0], [0.0, 2.0]])
        b = torch.tensor([[0.0, 3.0], [-4.0, 0.0]])
        assert pair_loss(a, b).item() == pytest.approx(1.0, abs=1e-6)

    def test_batch_mean_by_hand(self):
        a = torch.tensor([[1.0, 0.0], [1.0, 0.0]])
        b = torch.tensor([[1.0, 0.0], [0.0, 1.0]])  # cosines 1 and 0
        assert pair_loss(a, b).item() == pytest.approx(0.5, abs=1e-6)

    def test_symmetry(self):
        torch.manual_seed(0)
        a, b = torch.randn(6, 5), torch.randn(6, 5)
        assert pair_loss(a, b).item() == pytest.approx(pair_loss(b, a).item(), abs=1e-7)

    @settings(max_examples=40, deadline=None)
    @given(
        scale_a=st.floats(0.05, 20.0),
        scale_b=st.floats(0.05, 20.0),
        seed=st.integers(0, 100),
    )
    def test_scale_invariance(self, scale_a, scale_b, seed):
        g = torch.Generator().manual_seed(seed)
        a = torch.randn(3, 4, generator=g, dtype=torch.float64)
        b = torch.randn(3, 4, generator=g, dtype=torch.float64)
        base = pair_loss(a, b).item()
        scaled = pair_loss(scale_a * a, scale_b * b).item()
        assert scaled == pytest.approx(base, abs=1e-9)

    def test_gradients_match_finite_differences(self):
        torch.manual_seed(1)
        a = torch.randn(3, 4, dtype=torch.float64, requires_grad=True)
        b = torch.randn(3, 4, dtype=torch.float64)
        pair_loss(a, b).backward()
        a_leaf = a.detach().clone()
        fd = central_diff_grad(a_leaf, lambda: pair_loss(a_leaf, b))
        assert_close_rel(a.grad, fd)

    def test_zero_embedding_stays_finite(self):
        a = torch.zeros(2, 4)
        b = torch.randn(2, 4)
        assert torch.isfinite(pair_loss(a, b))

    def test_shape_checks(self):
        with pytest.raises(ValueError):
            pair_loss(torch.randn(2, 4), torch.randn(3, 4))
        with pytest.raises(ValueError):
            pair_loss(torch.randn(4), torch.randn(4))


class TestBCSTTotal:
    def t(self, v):
        return torch.tensor(v)

    def test_composition_arithmetic(self):
        total = bcst_total(self.t(1.0), self.t(2.0), self.t(0.5), 1.5)
        assert total.item() == pytest.approx(1.0 + 2.0 + 1.5 * 0.5, abs=1e-7)

    def test_zero_lambda_drops_pair_term(self):
        total = bcst_total(self.t(1.0), self.t(2.0), self.t(99.0), 0.0)
        assert total.item() == pytest.approx(3.0)

    @pytest.mark.parametrize(
        "bad,name",
        [
            ((float("nan"), 1.0, 1.0), "L_uttS"),
            ((1.0, float("inf"), 1.0), "L_uttST"),
            ((1.0, 1.0, float("nan")), "L_pair"),
        ],
    )
    def test_non_finite_components_named(self, bad, name):
        with pytest.raises(LossError, match=name):
            bcst_total(self.t(bad[0]), self.t(bad[1]), self.t(bad[2]), 0.5)


class TestBCSTConfig:
    def test_negative_lambda_rejected(self):
        with pytest.raises(ValueError):
            BCSTConfig(lambda_weight=-1.0)

    def test_defaults(self):
        cfg = BCSTConfig()
        assert not cfg.enabled
        assert cfg.lambda_weight == 0.5
