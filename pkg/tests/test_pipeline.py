import numpy as np
import pytest

from modedse.codec import evaluate_mode, valid_modes
from modedse.genotype import (
    PB_GENOTYPE_TEXT,
    DepthGenes,
    Genotype,
    InvalidGenotype,
    exhaustive_genotype,
    parse_genotype,
)
from modedse.media_io import synthesize_sequence
from modedse.pipeline import ModePipeline, encode_sequence

from oracles import interpret_guards, cost_lookup, prepared_frames, random_cu_instance


@pytest.fixture(scope="module")
def frames():
    seqs = [synthesize_sequence(k, 128, 64, 2, seed=i) for i, k in enumerate(("moving_block", "gradient"))]
    return prepared_frames(seqs)


def test_guard_rule_matches_interpreter(frames):
    rng = np.random.default_rng(5)
    for _ in range(60):
        g, pipe, ctx = random_cu_instance(rng, frames)
        trace = []
        pipe.decide_cu(ctx, trace)
        genes = g[ctx.depth]
        expect = interpret_guards(genes.order, genes.guards, cost_lookup(ctx, pipe), ctx.frame.intra_only)
        assert [s.position for s in trace] == expect


def test_best_is_min_over_evaluated(frames):
    rng = np.random.default_rng(9)
    for _ in range(20):
        g, pipe, ctx = random_cu_instance(rng, frames)
        trace = []
        best = pipe.decide_cu(ctx, trace)
        assert best.rd.cost_j == min(s.cost_j for s in trace)
        # earliest position wins ties
        first = next(s for s in trace if s.cost_j == best.rd.cost_j)
        assert best.mode == first.mode


def test_effort_counts_evaluations_and_guard_checks(frames):
    state = frames[1]
    g = parse_genotype(PB_GENOTYPE_TEXT)
    pipe = ModePipeline(g)
    ctx = pipe.context(state, 64, 0, 3, 30)
    trace = []
    res = pipe.decide_cu(ctx, trace)
    guarded = sum(1 for gd in g[3].guards[2:] if gd is not None)
    evals = sum(evaluate_mode(s.mode, ctx, pipe).effort for s in trace)
    assert res.effort == evals + guarded


def test_exhaustive_evaluates_everything(frames):
    pipe = ModePipeline(exhaustive_genotype())
    for depth in range(4):
        trace = []
        pipe.decide_cu(pipe.context(frames[1], 64, 0, depth, 20), trace)
        assert sorted(s.mode for s in trace) == sorted(valid_modes(depth))


def test_intra_frame_uses_intra_modes_only(frames):
    pipe = ModePipeline(parse_genotype(PB_GENOTYPE_TEXT))
    trace = []
    pipe.decide_cu(pipe.context(frames[0], 64, 0, 3, 20), trace)
    assert {s.mode for s in trace} <= {0, 9}
    assert len(trace) == 2


def test_decide_leaves_state_untouched(frames):
    state = frames[1]
    before = (state.recon.copy(), state.motion.copy(), state.has_motion.copy())
    pipe = ModePipeline(exhaustive_genotype())
    pipe.decide_cu(pipe.context(state, 64, 0, 0, 20))
    np.testing.assert_array_equal(state.recon, before[0])
    np.testing.assert_array_equal(state.motion, before[1])
    np.testing.assert_array_equal(state.has_motion, before[2])


def test_invalid_genotype_rejected():
    g = exhaustive_genotype()
    bad = Genotype(g.depths[:3] + (DepthGenes(3, (0, 1, 2, 3, 4, 9), (None, 1, None, None, None, None)),))
    with pytest.raises(InvalidGenotype):
        ModePipeline(bad)


def test_encode_report(tiny_seq):
    rep = encode_sequence(tiny_seq, exhaustive_genotype(), 30)
    assert rep.num_samples == 2 * 64 * 64
    assert rep.total_rate == pytest.approx(sum(c.rate for c in rep.ctus))
    assert rep.total_distortion == sum(c.distortion for c in rep.ctus)
    again = encode_sequence(tiny_seq, exhaustive_genotype(), 30)
    assert again.to_dict() | {"wall_time_s": 0} == rep.to_dict() | {"wall_time_s": 0}


def test_guarded_genotype_saves_effort(tiny_seq):
    full = encode_sequence(tiny_seq, exhaustive_genotype(), 30)
    fast = encode_sequence(tiny_seq, parse_genotype(PB_GENOTYPE_TEXT), 30)
    assert fast.effort < full.effort


def test_probes_do_not_change_result(tiny_seq):
    plain = encode_sequence(tiny_seq, exhaustive_genotype(), 20)
    probed = encode_sequence(tiny_seq, exhaustive_genotype(), 20, probes=[parse_genotype(PB_GENOTYPE_TEXT)])
    assert plain.total_cost == probed.total_cost
    assert all(len(c.probe_costs) == 1 for c in probed.ctus)


def test_unsatisfiable_guards_run_first_two(frames):
    g = exhaustive_genotype()
    # every guard names IntraNxN, which sits last and so is never best in time
    deep = DepthGenes(3, (1, 2, 3, 4, 0, 9), (None, None, 9, 9, 9, 9))
    pipe = ModePipeline(Genotype(g.depths[:3] + (deep,)))
    trace = []
    pipe.decide_cu(pipe.context(frames[1], 64, 0, 3, 20), trace)
    assert [s.position for s in trace] == [0, 1]


def test_order_permutation_keeps_cost(frames):
    rng = np.random.default_rng(2)
    g = exhaustive_genotype()
    for depth in (1, 3):
        ctx = ModePipeline(g).context(frames[1], 64, 0, depth, 30)
        base = ModePipeline(g).decide_cu(ctx).rd.cost_j
        order = tuple(int(m) for m in rng.permutation(g[depth].order))
        genes = DepthGenes(depth, order, g[depth].guards)
        perm = Genotype(tuple(genes if d == depth else g[d] for d in range(4)))
        assert ModePipeline(perm).decide_cu(ctx).rd.cost_j == base


def test_feature_conservation(tiny_seq):
    rep = encode_sequence(tiny_seq, parse_genotype(PB_GENOTYPE_TEXT), 20)
    from collections import Counter
    total = Counter()
    for f in rep.frame_features:
        total.update(f)
    assert total == rep.features
    assert sum(rep.mode_counts.values()) > 0


def test_static_flat_sequence_is_skipped():
    seq = synthesize_sequence("flat", 64, 64, 2, seed=0)
    rep = encode_sequence(seq, exhaustive_genotype(), 30)
    p_frame = [c for c in rep.ctus if c.frame == 1]
    assert all(k.split(":")[2] == "skip" for c in p_frame for k in c.modes)
    # the skip copies the I-frame reconstruction, so the P-frame error equals it
    assert p_frame[0].distortion == rep.ctus[0].distortion


def test_mid_gray_sequence_is_lossless():
    from modedse.media_io import Frame, Sequence

    gray = np.full((64, 64), 128, dtype=np.uint8)
    rep = encode_sequence(Sequence((Frame(gray), Frame(gray)), "gray"), exhaustive_genotype(), 30)
    assert rep.total_distortion == 0
    assert rep.ctus[1].rate == 2.0  # skip header, single candidate
