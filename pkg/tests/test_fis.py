"""Selection-algorithm tests: heredity counting, threshold strictness,
lattice pruning, exact recovery on small cubes, and family round trips."""

import numpy as np
import pytest

from sian.anova import cube_lookup, cube_points, downward_closure, fourier_transform
from sian.errors import (
    ArchitectureError,
    ConfigError,
    DomainError,
    FormatError,
    ShapeMismatchError,
)
from sian.fis import (
    FisConfig,
    InteractionFamily,
    SkippedCandidateWarning,
    family_from_json,
    family_to_architecture,
    family_to_json,
    heredity_score,
    load_family,
    save_family,
    select_interactions,
)
from sian.model import InteractionSet
from sian.nn import CLASSIFICATION
from sian.tensor import Rng


def sign_table(d, *terms):
    """Value table of sum_j coeff_j * prod_{i in set_j} x_i on the cube."""
    pts = cube_points(d)
    out = np.zeros(1 << d)
    for coeff, subset in terms:
        term = np.full(1 << d, coeff)
        for i in subset:
            term = term * pts[:, i]
        out += term
    return out


class TestConfig:
    def test_bounds(self):
        with pytest.raises(ConfigError):
            FisConfig(K=0, theta=0.1)
        with pytest.raises(ConfigError):
            FisConfig(K=2, theta=0.1, tau=1.5)
        with pytest.raises(ConfigError):
            FisConfig(K=2, theta=-0.1)
        with pytest.raises(ConfigError):
            FisConfig(K=2, theta=0.1, subsample_cap=0)

    def test_scalar_theta_broadcasts(self):
        cfg = FisConfig(K=3, theta=0.25)
        assert cfg.theta_for(1) == cfg.theta_for(3) == 0.25

    def test_per_degree_theta(self):
        cfg = FisConfig(K=3, theta=[0.5, 0.1, 0.02])
        assert cfg.theta_for(2) == 0.1

    def test_per_degree_theta_must_cover_k(self):
        with pytest.raises(ConfigError):
            FisConfig(K=3, theta=[0.5, 0.1])


class TestHeredity:
    def test_both_parents_present(self):
        assert heredity_score((0, 1), [(0,), (1,)]) == 1.0

    def test_half_present(self):
        assert heredity_score((0, 1), [(0,)]) == 0.5

    def test_two_thirds(self):
        assert heredity_score((0, 1, 2), [(0, 1), (0, 2)]) == pytest.approx(2 / 3)

    def test_accepts_family_object(self):
        fam = InteractionFamily(sets=((0,), (1,)), strengths=(1.0, 1.0))
        assert heredity_score((0, 1), fam) == 1.0

    def test_singletons_rejected(self):
        with pytest.raises(DomainError):
            heredity_score((0,), [])


class TestSelect:
    def test_worked_cube_example(self):
        # f(x) = x0 + x0 x1; flipping every sign is the baseline
        f = cube_lookup(sign_table(2, (1.0, (0,)), (1.0, (0, 1))))
        cfg = FisConfig(K=2, theta=0.01, tau=0.5)
        fam = select_interactions(f, cube_points(2), lambda p: -p, cfg)
        assert fam.indices == ((0,), (1,), (0, 1))

    def test_theta_above_everything_gives_empty_family(self):
        f = cube_lookup(sign_table(2, (1.0, (0, 1))))
        cfg = FisConfig(K=2, theta=1e9)
        fam = select_interactions(f, cube_points(2), lambda p: -p, cfg)
        assert len(fam) == 0
        assert len(fam.evaluated) == 2  # singletons were still scored

    def test_depth_one_returns_all_singletons(self):
        d = 4
        f = lambda b: b @ np.arange(1.0, d + 1)
        rng = Rng(0)
        cfg = FisConfig(K=1, theta=0.0)
        fam = select_interactions(f, rng.uniform(1, 2, (30, d)), np.zeros(d), cfg)
        assert fam.indices == ((0,), (1,), (2,), (3,))
        # linear slopes squared are recovered exactly on any sample set
        assert fam.strengths == pytest.approx([1.0, 4.0, 9.0, 16.0])

    def test_exact_recovery_of_downward_closure(self):
        support = [(4,), (0, 1, 2)]
        values = sign_table(6, (0.7, support[0]), (-0.4, support[1]))
        cfg = FisConfig(K=6, theta=1e-4, tau=0.5)
        fam = select_interactions(
            cube_lookup(values), cube_points(6), lambda p: -p, cfg
        )
        assert fam.indices == downward_closure(support)

    def test_threshold_is_strict(self):
        # the pair's strength is exactly 1.0 on the cube with a flip baseline
        f = cube_lookup(sign_table(2, (1.0, (0, 1))))
        at = select_interactions(
            f, cube_points(2), lambda p: -p, FisConfig(K=2, theta=1.0)
        )
        below = select_interactions(
            f, cube_points(2), lambda p: -p, FisConfig(K=2, theta=0.999)
        )
        assert (0, 1) not in at.indices
        assert (0, 1) in below.indices

    def test_sparse_pairs_prune_level_three(self):
        d = 12
        values = sign_table(
            d, (1.0, (0, 1)), (1.0, (2, 3)), (1.0, (4, 5))
        )
        cfg = FisConfig(K=3, theta=1e-4, tau=0.5)
        fam = select_interactions(
            cube_lookup(values), cube_points(d), lambda p: -p, cfg
        )
        assert fam.indices == (
            (0,), (1,), (2,), (3,), (4,), (5,),
            (0, 1), (2, 3), (4, 5),
        )
        by_degree = {}
        for rec in fam.evaluated:
            k = rec.interaction.order
            by_degree[k] = by_degree.get(k, 0) + 1
        assert by_degree[1] == 12
        assert by_degree[2] == 15  # only pairs inside the six live features
        assert by_degree.get(3, 0) <= 10  # disjoint pairs leave no viable triple

    def test_raising_tau_never_adds_candidates(self):
        d = 12
        values = sign_table(d, (1.0, (0, 1)), (1.0, (2, 3)), (1.0, (4, 5)))
        f = cube_lookup(values)
        counts = []
        for tau in (0.0, 0.5, 0.9):
            cfg = FisConfig(K=3, theta=1e-4, tau=tau)
            fam = select_interactions(f, cube_points(d), lambda p: -p, cfg)
            by_degree = [0, 0, 0, 0]
            for rec in fam.evaluated:
                by_degree[rec.interaction.order] += 1
            counts.append(by_degree)
        for lo, hi in zip(counts[1:], counts[:-1]):
            assert all(a <= b for a, b in zip(lo, hi))
        assert counts[0][2] > counts[1][2]  # tau = 0 really does let more through

    def test_impossible_candidate_warns_and_skips(self):
        rng = Rng(1)
        validation = rng.uniform(1, 2, (20, 3))
        validation[:, 0] = 0.0  # matches the baseline everywhere
        f = lambda b: b[:, 0] + b[:, 1] * b[:, 2]
        cfg = FisConfig(K=2, theta=1e-6)
        with pytest.warns(SkippedCandidateWarning):
            fam = select_interactions(f, validation, np.zeros(3), cfg)
        assert (0,) not in fam.indices
        assert (1, 2) in fam.indices
        assert all(rec.interaction.indices != (0,) for rec in fam.evaluated)

    def test_zero_features_gives_empty_family(self):
        fam = select_interactions(
            lambda b: np.zeros(len(b)), np.empty((3, 0)), np.empty(0),
            FisConfig(K=2, theta=0.1),
        )
        assert len(fam) == 0 and len(fam.evaluated) == 0

    def test_deterministic_under_subsampling(self):
        rng = Rng(2)
        validation = rng.uniform(0.5, 2, (300, 4))
        f = lambda b: b[:, 0] * b[:, 1] + b[:, 2]
        cfg = FisConfig(K=2, theta=1e-3, subsample_cap=64, seed=7)
        fam1 = select_interactions(f, validation, np.zeros(4), cfg)
        fam2 = select_interactions(f, validation, np.zeros(4), cfg)
        assert fam1.indices == fam2.indices
        assert fam1.strengths == fam2.strengths

    def test_validation_must_be_two_dimensional(self):
        with pytest.raises(ShapeMismatchError):
            select_interactions(
                lambda b: np.zeros(len(b)), np.zeros(5), np.zeros(1),
                FisConfig(K=1, theta=0.1),
            )


class TestFamily:
    def test_duplicates_rejected(self):
        with pytest.raises(ArchitectureError):
            InteractionFamily(sets=((0,), (0,)), strengths=(1.0, 1.0))

    def test_strength_count_must_match(self):
        with pytest.raises(ShapeMismatchError):
            InteractionFamily(sets=((0,),), strengths=())

    def test_json_round_trip(self, tmp_path):
        fam = InteractionFamily(
            sets=((0,), (2,), (0, 2)), strengths=(0.1, 1.0 / 3.0, 0.25)
        )
        path = tmp_path / "family.json"
        save_family(fam, path)
        back = load_family(path)
        assert back.indices == fam.indices
        assert back.strengths == fam.strengths  # repr-exact floats

    def test_json_shape(self):
        fam = InteractionFamily(sets=((1, 3),), strengths=(0.5,))
        assert family_to_json(fam) == [{"indices": [1, 3], "strength": 0.5}]

    def test_bad_json_rejected(self):
        with pytest.raises(FormatError):
            family_from_json({"indices": [0]})
        with pytest.raises(FormatError):
            family_from_json([{"strength": 1.0}])

    def test_report_export(self):
        f = cube_lookup(sign_table(2, (1.0, (0, 1))))
        fam = select_interactions(
            f, cube_points(2), lambda p: -p, FisConfig(K=2, theta=1e-4)
        )
        report = fam.report()
        assert len(report.records) == len(fam.evaluated)


class TestFamilyToArchitecture:
    def test_empty_family_is_bias_only(self):
        fam = InteractionFamily(sets=(), strengths=())
        arch = family_to_architecture(fam, d=5)
        assert arch.n_subnets == 0
        assert arch.order == 0

    def test_sets_carried_in_order(self):
        sets = ((0,), (1,), (2,), (0, 1), (0, 2), (1, 2))
        fam = InteractionFamily(sets=sets, strengths=(1.0,) * 6)
        arch = family_to_architecture(fam, d=3, widths=(8, 6), head=CLASSIFICATION)
        assert arch.n_subnets == 6
        assert arch.gather_plan == sets
        assert arch.widths == (8, 6)
        assert arch.head is CLASSIFICATION

    def test_duplicate_raw_sets_rejected(self):
        with pytest.raises(ArchitectureError):
            family_to_architecture([(0, 1), (0, 1)], d=3)

    def test_out_of_range_feature_rejected(self):
        fam = InteractionFamily(sets=((4,),), strengths=(1.0,))
        with pytest.raises(ArchitectureError):
            family_to_architecture(fam, d=3)

    def test_accepts_interaction_set_instances(self):
        arch = family_to_architecture([InteractionSet.of(0), (1, 2)], d=4)
        assert arch.gather_plan == ((0,), (1, 2))
