import itertools

import pytest

from beqharness import (
    DecodeMode,
    Diagnostic,
    DirectionProof,
    FormalStatement,
    GenerationConfig,
    Origin,
    StrategyKind,
    TypeCheckKind,
    TypeCheckStatus,
    Verdict,
    VerifRecord,
    parse_serialized,
    serialize_with_sorry,
    verdict_from_directions,
)

from conftest import statement


def proof(success: bool, trivial: bool = False) -> DirectionProof:
    if success:
        return DirectionProof(
            success=True,
            strategy=StrategyKind.EXACT_RESTRICTED,
            script="exact src_thm",
            trivially_provable=trivial,
        )
    return DirectionProof(
        success=False, strategy=StrategyKind.NONE, script="", trivially_provable=trivial
    )


class TestTypeCheckKind:
    def test_well_typed_split(self):
        assert TypeCheckKind.WELL_TYPED_WITH_SORRY.is_well_typed
        assert TypeCheckKind.WELL_TYPED_COMPLETE.is_well_typed
        assert not TypeCheckKind.ILL_TYPED.is_well_typed
        assert not TypeCheckKind.TIMEOUT.is_well_typed
        assert not TypeCheckKind.BACKEND_FAILURE.is_well_typed


class TestFormalStatement:
    def test_length_counts_signature_only(self):
        s = statement("theorem t : True", context="import Mathlib")
        assert s.length == len("theorem t : True")

    def test_length_counts_unicode_scalars(self):
        s = statement("theorem t : ∀ x : ℕ, x = x")
        assert s.length == 26

    def test_with_context_replaces(self):
        s = statement("theorem t : True").with_context("open Nat")
        assert s.context == "open Nat"
        assert s.signature_src == "theorem t : True"

    def test_frozen(self):
        s = statement("theorem t : True")
        with pytest.raises(AttributeError):
            s.name = "other"


class TestSerialization:
    def test_serialize_with_context(self):
        s = statement("theorem t : True", context="import Mathlib\nopen Nat")
        assert serialize_with_sorry(s) == "import Mathlib\nopen Nat\ntheorem t : True := sorry"

    def test_serialize_without_context(self):
        s = statement("theorem t : True")
        assert serialize_with_sorry(s) == "theorem t : True := sorry"

    def test_parse_round_trip(self):
        s = statement("theorem t (n : Nat) :\n    n = n", context="import Mathlib")
        context, sig = parse_serialized(serialize_with_sorry(s))
        assert context == "import Mathlib"
        assert sig == "theorem t (n : Nat) :\n    n = n"

    def test_parse_no_context(self):
        context, sig = parse_serialized("lemma l : True := sorry")
        assert context == ""
        assert sig == "lemma l : True"


class TestGenerationConfig:
    def test_valid(self):
        cfg = GenerationConfig(0.7, 50, "m", DecodeMode.TEMPERATURE_SAMPLING)
        assert cfg.num_samples == 50

    def test_negative_temperature_rejected(self):
        with pytest.raises(ValueError):
            GenerationConfig(-0.1, 1, "m", DecodeMode.GREEDY)

    def test_zero_samples_rejected(self):
        with pytest.raises(ValueError):
            GenerationConfig(0.0, 0, "m", DecodeMode.GREEDY)

    def test_greedy_implies_single_sample(self):
        with pytest.raises(ValueError):
            GenerationConfig(0.0, 2, "m", DecodeMode.GREEDY)
        GenerationConfig(0.0, 1, "m", DecodeMode.GREEDY)


class TestTypeCheckStatus:
    def test_ill_typed_requires_error_diagnostic(self):
        with pytest.raises(ValueError):
            TypeCheckStatus(TypeCheckKind.ILL_TYPED)
        with pytest.raises(ValueError):
            TypeCheckStatus(
                TypeCheckKind.ILL_TYPED, (Diagnostic("warning", "declaration uses 'sorry'"),)
            )
        TypeCheckStatus(TypeCheckKind.ILL_TYPED, (Diagnostic("error", "type mismatch"),))


class TestDirectionProof:
    def test_success_requires_strategy_and_script(self):
        with pytest.raises(ValueError):
            DirectionProof(success=True, strategy=StrategyKind.NONE, script="x")
        with pytest.raises(ValueError):
            DirectionProof(success=True, strategy=StrategyKind.EXACT_RESTRICTED, script="")


class TestVerdictTable:
    def test_success_combinations(self):
        table = {
            (True, True): Verdict.EQUIVALENT,
            (True, False): Verdict.FORWARD_ONLY,
            (False, True): Verdict.BACKWARD_ONLY,
            (False, False): Verdict.NOT_PROVEN,
        }
        for (f, b), expected in table.items():
            assert verdict_from_directions(proof(f), proof(b)) is expected

    def test_trivial_flag_dominates_under_guard(self):
        # Any trivially-provable direction forces the flagged verdict,
        # regardless of which directions succeeded.
        for f_success, b_success, f_triv, b_triv in itertools.product([True, False], repeat=4):
            if not (f_triv or b_triv):
                continue
            verdict = verdict_from_directions(
                proof(f_success, f_triv), proof(b_success, b_triv), triviality_guard=True
            )
            assert verdict is Verdict.TRIVIALITY_FLAGGED

    def test_guard_off_ignores_flags(self):
        verdict = verdict_from_directions(
            proof(True, trivial=True), proof(True), triviality_guard=False
        )
        assert verdict is Verdict.EQUIVALENT


class TestVerifRecord:
    def test_reference_length_recomputed(self):
        ref = FormalStatement("t", "", "theorem t : True", Origin.REFERENCE)
        pred = FormalStatement("t", "", "theorem t : 1 = 1", Origin.PREDICTION)
        rec = VerifRecord(id="r1", informal="trivial", reference=ref, prediction=pred, label=True)
        assert rec.reference_length == len("theorem t : True")
