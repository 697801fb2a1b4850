"""Acceptance gate: one test per release criterion.

Run with -v for the per-criterion pass/fail listing. Criterion 8 trains
real (small) models for five seeds and dominates the suite's runtime at
roughly twenty minutes on one CPU core; everything else finishes in
seconds. Each test prints a one-line verdict visible under -s.
"""

from __future__ import annotations

import hashlib
import os
import time

import numpy as np
import pytest
import torch
import torch.nn.functional as F
from torch import nn

from crossvocal.bcst import pair_loss
from crossvocal.ddal import DDALConfig, SimAMGate, disentangle, grad_reverse, make_gate
from crossvocal.manifest import load_manifest, quality_assess, split_by_utterance_count
from crossvocal.metrics import DCFConfig, compute_eer, compute_mdcf
from crossvocal.model import ArcFaceLoss, BackboneConfig, ResNetEncoder
from crossvocal.network import VerificationNet
from crossvocal.toy import ToyCorpusSpec, gen_toy_corpus
from crossvocal.trainer import (
    TrainConfig,
    extract_embeddings,
    load_checkpoint,
    load_loss_log,
    resolve_variant,
    train,
)
from crossvocal.trials import SCENARIOS, build_trials, score_trials
from crossvocal.tsne import project_embeddings

from conftest import TINY_BACKBONE, make_manifest
from test_metrics import eer_oracle, mdcf_oracle, random_trials
from test_model import assert_close_rel, central_diff_grad
from test_trials import DOMAIN_RULES


def verdict(n: int, text: str) -> None:
    print(f"criterion {n:02d} PASS: {text}")


def test_01_metric_oracle_equivalence():
    """EER and minimum DCF match exact-rational brute-force sweeps."""
    rng = np.random.default_rng(20240817)
    scores, labels = random_trials(rng, 1000)
    labels = np.asarray(labels)
    scores = np.where(labels == 1, scores + 1.0, scores)

    start = time.perf_counter()
    eer = compute_eer(scores, labels)
    mdcf_default = compute_mdcf(scores, labels)
    mdcf_heavy = compute_mdcf(scores, labels, DCFConfig(0.5, 10.0, 1.0))
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0, f"metric computation took {elapsed:.3f}s"

    eer_diff = abs(eer - float(eer_oracle(scores, labels)))
    d_default = abs(mdcf_default - float(mdcf_oracle(scores, labels, 0.01, 1.0, 1.0)))
    d_heavy = abs(mdcf_heavy - float(mdcf_oracle(scores, labels, 0.5, 10.0, 1.0)))
    assert eer_diff <= 1e-9
    assert d_default <= 1e-9
    assert d_heavy <= 1e-9
    verdict(
        1,
        f"1000 trials: |eer diff| {eer_diff:.2e}, |mdcf diffs| {d_default:.2e}/"
        f"{d_heavy:.2e}, compute time {elapsed * 1e3:.1f} ms",
    )


def test_02_feature_map_reconstruction():
    """f_id + f_domain rebuilds f to single precision for both gates."""
    torch.manual_seed(2)
    channels, freq = 16, 10
    gates = {"simam": SimAMGate(), "asp": make_gate("asp", channels, freq)}
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(100):
        batch = int(rng.integers(1, 3))
        frames = int(rng.integers(2, 13))
        f = torch.randn(batch, channels, freq, frames)
        for gate in gates.values():
            parts = disentangle(f, gate)
            err = (f - (parts.f_id + parts.f_domain)).abs().max().item()
            worst = max(worst, err)
    assert worst <= 1e-6
    verdict(2, f"100 maps x 2 gate variants, max |f - (f_id + f_domain)| {worst:.2e}")


def test_03_gradient_reversal_wiring():
    """Reversed gradients are exact negations and match finite differences."""
    torch.manual_seed(3)
    head = nn.Sequential(nn.Linear(8, 6), nn.ReLU(), nn.Linear(6, 2)).double()
    x = torch.randn(5, 8, dtype=torch.float64)
    labels = torch.tensor([0, 1, 0, 1, 1])

    through = x.clone().requires_grad_(True)
    F.cross_entropy(head(grad_reverse(through)), labels).backward()
    plain = x.clone().requires_grad_(True)
    F.cross_entropy(head(plain), labels).backward()
    assert torch.equal(through.grad, -plain.grad)

    encoder = nn.Sequential(nn.Linear(4, 6), nn.Tanh()).double()
    classifier = nn.Linear(6, 2).double()
    inputs = torch.randn(7, 4, dtype=torch.float64)
    targets = torch.tensor([0, 1, 1, 0, 1, 0, 0])

    def loss_fn():
        return F.cross_entropy(classifier(grad_reverse(encoder(inputs))), targets)

    loss_fn().backward()
    fd_encoder = central_diff_grad(encoder[0].weight, loss_fn)
    fd_classifier = central_diff_grad(classifier.weight, loss_fn)
    assert_close_rel(encoder[0].weight.grad, -fd_encoder)
    assert_close_rel(classifier.weight.grad, fd_classifier)
    verdict(3, "exact negation elementwise; end-to-end FD rel err < 1e-4")


def test_04_margin_loss_correctness():
    """Zero-margin unit-scale reduction and analytic-vs-FD gradients."""
    torch.manual_seed(4)
    plain = ArcFaceLoss(6, embedding_dim=8, margin=0.0, scale=1.0)
    z = torch.randn(10, 8)
    labels = torch.randint(0, 6, (10,))
    got = plain(z, labels).item()
    cosines = F.normalize(z) @ F.normalize(plain.weight).t()
    want = F.cross_entropy(cosines, labels).item()
    reduction_diff = abs(got - want)
    assert reduction_diff <= 1e-6

    margined = ArcFaceLoss(5, embedding_dim=6, margin=0.25, scale=8.0).double()
    z = torch.randn(4, 6, dtype=torch.float64, requires_grad=True)
    labels = torch.tensor([0, 3, 1, 4])
    margined(z, labels).backward()
    analytic_z = z.grad.clone()
    analytic_w = margined.weight.grad.clone()

    z_leaf = z.detach().clone()
    fd_z = central_diff_grad(z_leaf, lambda: margined(z_leaf, labels))
    fd_w = central_diff_grad(margined.weight, lambda: margined(z.detach(), labels))
    assert_close_rel(analytic_z, fd_z)
    assert_close_rel(analytic_w, fd_w)
    verdict(
        4,
        f"m=0,s=1 reduction diff {reduction_diff:.2e}; both FD checks rel err < 1e-4",
    )


def test_05_architecture_fidelity():
    """Stage-four geometry is 512 x 10 x T/8; budgets match the references."""
    encoder = ResNetEncoder(BackboneConfig())
    encoder.eval()
    with torch.no_grad():
        for frames in (8, 80, 200):
            out = encoder(torch.randn(1, 1, 80, frames))
            assert out.shape == (1, 512, 10, frames // 8), frames

    counts = {}
    for variant in ("none", "simam"):
        net = VerificationNet(
            n_speakers=4, ddal=DDALConfig(variant=variant) if variant != "none" else None
        )
        counts[variant] = net.extractor_parameter_count()
        del net
    base_rel = abs(counts["none"] - 20.54e6) / 20.54e6
    delta = counts["simam"] - counts["none"]
    assert base_rel < 0.05
    assert abs(delta - 0.25e6) <= 0.05e6
    verdict(
        5,
        f"shapes 512x10x{{1,10,25}}; baseline {counts['none']:,} params "
        f"({100 * base_rel:.1f}% off 20.54M), attention delta {delta:,}",
    )


def test_06_trial_construction_properties(tmp_path):
    """Scenario domain rules, 5/5 caps, and labels hold on a toy manifest."""
    spec = ToyCorpusSpec(
        n_speakers=10, utts_per_domain=3, duration_range=(0.3, 0.5), seed=1
    )
    manifest = gen_toy_corpus(spec, tmp_path / "corpus")
    speaker_of = {r.utt_id: r.speaker_id for r in manifest}
    domain_of = {r.utt_id: r.domain for r in manifest}
    n_checked = 0
    for scenario in SCENARIOS:
        enroll_domains, test_domains = DOMAIN_RULES[scenario]
        trials = build_trials(manifest, scenario, seed=3)
        assert trials
        per_utt = {}
        for t in trials:
            assert domain_of[t.enroll_utt] in enroll_domains
            assert domain_of[t.test_utt] in test_domains
            assert t.is_target == (speaker_of[t.enroll_utt] == speaker_of[t.test_utt])
            key = (t.test_utt, t.is_target)
            per_utt[key] = per_utt.get(key, 0) + 1
        assert max(per_utt.values()) <= 5
        n_checked += len(trials)
    verdict(6, f"{n_checked} trials across {len(SCENARIOS)} scenarios, all properties hold")


def test_07_split_fidelity():
    """split_by_utterance_count keeps the k speakers with the most utterances."""
    counts = {"ann": 7, "bob": 5, "cid": 4, "dee": 2, "eve": 1}
    entries = [
        (f"{spk}_{i}", spk, "ST" if i % 2 else "S")
        for spk, n in counts.items()
        for i in range(n)
    ]
    manifest = make_manifest(entries)
    for k, expected in ((2, ["ann", "bob"]), (3, ["ann", "bob", "cid"])):
        train_m, test_m = split_by_utterance_count(manifest, k)
        assert train_m.speakers() == expected
        assert set(train_m.speakers()).isdisjoint(test_m.speakers())
        assert len(train_m) + len(test_m) == len(manifest)

    real_path = os.environ.get("KUNQUDB_MANIFEST")
    note = "real-corpus manifest not supplied"
    if real_path:
        real_train, real_test = split_by_utterance_count(load_manifest(real_path), 200)
        assert len(real_train.speakers()) == 200
        assert len(real_test.speakers()) == 139
        note = "real-corpus 200/139 partition reproduced"
    verdict(7, f"k highest-count speakers selected for k in (2, 3); {note}")


def test_08_cross_domain_trend(tmp_path_factory):
    """Pair-trained attention model beats the baseline cross-domain.

    Five seeds; each seed pretrains a baseline on stage speech only, then
    fine-tunes a baseline arm and a DDAL+BCST arm on both domains. The
    adapted arm must win cross-domain in at least 4 of 5 seeds, and the
    baseline's matched-domain EER must not exceed its cross-domain EER in
    at least 4 of 5 seeds.
    """
    root = tmp_path_factory.mktemp("trend")
    corpus_dir = root / "corpus"
    spec = ToyCorpusSpec(
        n_speakers=32, utts_per_domain=10, duration_range=(1.0, 1.6), seed=7
    )
    manifest = gen_toy_corpus(spec, corpus_dir)
    train_m, test_m = split_by_utterance_count(manifest, 24)
    backbone = BackboneConfig(
        block_counts=(1, 1, 1, 1), channel_widths=(8, 16, 32, 64), embedding_dim=32
    )
    trials = {sc: build_trials(test_m, sc, seed=0) for sc in ("st", "s", "cross")}

    def eer_by_scenario(checkpoint):
        model, _, _ = load_checkpoint(checkpoint)
        embeddings, errors = extract_embeddings(model, test_m, corpus_dir)
        assert not errors
        out = {}
        for scenario, pairs in trials.items():
            scores = score_trials(pairs, embeddings)
            out[scenario] = compute_eer(scores, [t.is_target for t in pairs])
        return out

    adapted_wins = 0
    matched_wins = 0
    for seed in range(5):
        pre_cfg = TrainConfig(
            variant="M1", n_steps=1200, batch_size=32, initial_lr=0.05,
            lr_milestones=(960,), crop_s=0.6, seed=seed, backbone=backbone,
            margin=0.1, arc_scale=16.0, log_every=0,
        )
        start = time.perf_counter()
        pre = train(pre_cfg, train_m.in_domain("ST"), corpus_dir, root / f"pre{seed}")
        assert time.perf_counter() - start < 600
        eers = {}
        for variant, batch_size in (("M1", 32), ("M4", 16)):
            ft_cfg = TrainConfig(
                variant=variant, n_steps=500, batch_size=batch_size,
                initial_lr=0.01, lr_milestones=(375,), crop_s=0.6, seed=seed + 100,
                backbone=backbone, margin=0.1, arc_scale=16.0, log_every=0,
                init_checkpoint=str(pre.final_checkpoint),
            )
            start = time.perf_counter()
            result = train(ft_cfg, train_m, corpus_dir, root / f"ft{seed}_{variant}")
            assert time.perf_counter() - start < 600
            eers[variant] = eer_by_scenario(result.final_checkpoint)
        if eers["M4"]["cross"] <= eers["M1"]["cross"]:
            adapted_wins += 1
        if max(eers["M1"]["st"], eers["M1"]["s"]) <= eers["M1"]["cross"]:
            matched_wins += 1
        print(
            f"  seed {seed}: baseline st/s/cross "
            f"{eers['M1']['st']:.4f}/{eers['M1']['s']:.4f}/{eers['M1']['cross']:.4f}, "
            f"adapted cross {eers['M4']['cross']:.4f}"
        )
    assert adapted_wins >= 4, f"adapted cross-domain wins {adapted_wins}/5"
    assert matched_wins >= 4, f"baseline matched <= cross in {matched_wins}/5"
    verdict(8, f"adapted wins {adapted_wins}/5, matched <= cross {matched_wins}/5")


def test_09_pair_training_properties(tiny_corpus):
    """pair_loss invariants plus loss composition over a full training run."""
    torch.manual_seed(9)
    z = torch.randn(4, 8)
    other = torch.randn(4, 8)
    assert pair_loss(z, z).item() <= 1e-6
    assert abs(pair_loss(z, -z).item() - 2.0) <= 1e-6
    assert abs(pair_loss(z, other).item() - pair_loss(3.7 * z, 0.25 * other).item()) <= 1e-6
    assert abs(pair_loss(z, other).item() - pair_loss(other, z).item()) <= 1e-9

    root, manifest = tiny_corpus
    config = TrainConfig(
        variant="M4", n_steps=40, batch_size=4, initial_lr=0.01, crop_s=0.5,
        seed=9, backbone=TINY_BACKBONE, log_every=0,
    )
    result = train(config, manifest, root, root / "pair_run")
    lambda_bcst = resolve_variant("M4").lambda_bcst
    logged = load_loss_log(result.loss_log)
    assert len(logged) == config.n_steps
    worst = 0.0
    for row in logged:
        assert None not in (row.l_utt_s, row.l_utt_st, row.l_pair)
        recomposed = row.l_utt_s + row.l_utt_st + lambda_bcst * row.l_pair
        worst = max(worst, abs(recomposed - row.total))
    assert worst <= 1e-6
    verdict(9, f"invariants hold; {len(logged)} logged steps recompose within {worst:.2e}")


def test_10_quality_assessment_exact():
    """Flags are exactly the utterances below 0.4 cosine to their group mean."""
    rng = np.random.default_rng(10)
    entries = []
    embeddings = {}
    for s, spk in enumerate(("anchor", "breeze", "cobalt")):
        for domain in ("ST", "S"):
            base = rng.normal(size=12)
            base /= np.linalg.norm(base)
            for j in range(4):
                utt = f"{spk}_{domain.lower()}{j}"
                entries.append((utt, spk, domain))
                noise = 0.15 if j < 3 else 2.5
                embeddings[utt] = base + noise * rng.normal(size=12)
    manifest = make_manifest(entries)

    expected = set()
    for spk in ("anchor", "breeze", "cobalt"):
        for domain in ("ST", "S"):
            group = [f"{spk}_{domain.lower()}{j}" for j in range(4)]
            centroid = np.mean([embeddings[u] for u in group], axis=0)
            for utt in group:
                vec = embeddings[utt]
                sim = vec @ centroid / (np.linalg.norm(vec) * np.linalg.norm(centroid))
                if sim < 0.4:
                    expected.add(utt)
    assert expected and len(expected) < len(entries)

    report = quality_assess(manifest, embeddings, threshold=0.4)
    assert {flag.utt_id for flag in report.flags} == expected
    assert report.n_checked == len(entries)
    verdict(10, f"flagged exactly {len(expected)}/{len(entries)} brute-force outliers")


def test_11_determinism(tmp_path):
    """Corpus generation, 50-step training, and projection repeat bitwise."""
    spec = ToyCorpusSpec(
        n_speakers=12, utts_per_domain=2, duration_range=(0.6, 0.9), seed=21
    )
    manifests = [gen_toy_corpus(spec, tmp_path / name) for name in ("gen_a", "gen_b")]
    gen_a, gen_b = tmp_path / "gen_a", tmp_path / "gen_b"
    assert (gen_a / "manifest.jsonl").read_bytes() == (gen_b / "manifest.jsonl").read_bytes()
    for record in manifests[0]:
        digests = [
            hashlib.sha256((root / record.audio_path).read_bytes()).hexdigest()
            for root in (gen_a, gen_b)
        ]
        assert digests[0] == digests[1], record.utt_id

    config = TrainConfig(
        variant="M1", n_steps=50, batch_size=4, initial_lr=0.01, crop_s=0.5,
        seed=5, backbone=TINY_BACKBONE, log_every=0,
    )
    results = [
        train(config, manifests[0], gen_a, tmp_path / f"run_{name}")
        for name in ("a", "b")
    ]
    assert results[0].reports == results[1].reports
    assert results[0].loss_log.read_bytes() == results[1].loss_log.read_bytes()
    models = [load_checkpoint(r.final_checkpoint)[0] for r in results]
    state_a, state_b = models[0].state_dict(), models[1].state_dict()
    assert state_a.keys() == state_b.keys()
    for key in state_a:
        assert torch.equal(state_a[key], state_b[key]), key

    embeddings, errors = extract_embeddings(models[0], manifests[0], gen_a)
    assert not errors
    coords = [
        project_embeddings(
            embeddings, manifests[0], tmp_path / f"map_{name}.png",
            n_speakers=11, perplexity=5.0, seed=0,
        ).coords_path.read_bytes()
        for name in ("a", "b")
    ]
    assert coords[0] == coords[1]
    verdict(11, "generation, 50-step training, and projection all bit-identical")
