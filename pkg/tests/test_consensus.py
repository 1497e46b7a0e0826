from random import Random

import pytest

from hqslab.consensus import (
    ABORT,
    BOTTOM,
    COMMIT,
    Ballot,
    ConsensusParams,
    below_incompatible,
    cons_handle,
    cons_propose,
    consensus_factory,
    new_consensus,
    timeout,
)
from hqslab.core import Partition, QuorumSystem
from hqslab.scenarios import decision_round, load_scenario, run
from hqslab.sim import Deliver, Msg, NetConfig, Send, StartTimer, new_sim

from conftest import canned

V5 = tuple(range(1, 6))
ANY3 = QuorumSystem.of({p: [[a, b, c] for a, b, c in [(1, 2, 3), (1, 2, 4), (1, 3, 4), (2, 3, 4)] if p in (a, b, c)]
                        for p in (1, 2, 3, 4)})


def oracle_below_incompatible(b, values):
    allb = [BOTTOM] + [Ballot(r, v) for r in range(1, b.round + 1) for v in values]
    return sorted(x for x in allb if x < b and x.value != b.value)


def test_ballot_order():
    assert BOTTOM < Ballot(1, 1) < Ballot(1, 2) < Ballot(2, 1)
    assert Ballot(2, 3).compatible(Ballot(5, 3)) and not Ballot(2, 3).compatible(Ballot(2, 4))
    assert Ballot.parse("0:bot") == BOTTOM and Ballot.parse("3:2") == Ballot(3, 2)
    assert Ballot(3, 2).key == "3:2" and BOTTOM.key == "0:bot"


def test_below_incompatible_examples():
    assert below_incompatible(Ballot(1, 3), V5) == [BOTTOM, Ballot(1, 1), Ballot(1, 2)]
    assert below_incompatible(Ballot(1, 1), V5) == [BOTTOM]
    got = below_incompatible(Ballot(3, 2), V5)
    assert got == oracle_below_incompatible(Ballot(3, 2), V5)
    # <0,bot>, four in each of rounds 1 and 2, and <3,1>
    assert len(got) == 10


@pytest.mark.parametrize("r", range(0, 5))
def test_below_incompatible_matches_oracle(r):
    for vals in ((1,), (1, 2), V5):
        for v in vals:
            b = Ballot(r, v) if r else BOTTOM
            assert below_incompatible(b, vals) == oracle_below_incompatible(b, vals)


def test_timeouts_double():
    assert [timeout(r) for r in range(4)] == [8, 16, 32, 64]


def test_leader_proposal_aborts_lower_ballots():
    qs, _ = canned("leader-switch")
    st = new_consensus(qs, 1, ConsensusParams(values=V5))
    st2, eff = cons_propose(st, 3)
    assert st2.candidate == Ballot(1, 3) and st.candidate == BOTTOM
    bcasts = sorted({e.msg.inst for e in eff if isinstance(e, Send)})
    assert bcasts == ["0:bot", "1:1", "1:2"]
    assert all(e.msg == Msg("BCAST", ABORT, e.msg.inst) for e in eff if isinstance(e, Send))
    assert StartTimer(16, ("round", 1)) in eff
    with pytest.raises(RuntimeError):
        cons_propose(st2, 3)


def test_non_leader_proposal_sends_nothing():
    qs, _ = canned("leader-switch")
    st, eff = cons_propose(new_consensus(qs, 3, ConsensusParams(values=V5)), 5)
    assert st.candidate == Ballot(1, 5)
    assert not any(isinstance(e, Send) for e in eff)
    with pytest.raises(ValueError):
        cons_propose(new_consensus(qs, 3, ConsensusParams(values=V5)), 9)


def test_aborts_prepare_highest_clear_ballot():
    st = new_consensus(ANY3, 2, ConsensusParams(values=V5))
    st.aborted = {0: {None}, 1: {1}}
    st._after_change()
    assert st.prepared == Ballot(1, 2)
    st.aborted[1] |= {2, 3}
    st._after_change()
    assert st.prepared == Ballot(1, 4)
    assert st.prepared_log == [Ballot(1, 2), Ballot(1, 4)]


def _deliver_commit(st, key):
    # READY for commit from everyone, the process itself included
    for frm in (1, 2, 3):
        st, _ = cons_handle(st, Deliver(frm, (Msg("BCAST", COMMIT, key),)))
    for frm in (1, 2, 3, 4):
        st, eff = cons_handle(st, Deliver(frm, (Msg("READY", COMMIT, key),)))
    return st, eff


def test_commit_for_other_ballot_does_not_decide():
    st = new_consensus(ANY3, 4, ConsensusParams(values=V5))
    st, _ = cons_propose(st, 2)
    st, eff = _deliver_commit(st, "1:3")
    assert st.decided is None and st.prepared == BOTTOM
    assert st.fv["1:3"].delivered and st.fv["1:3"].delivered_val == COMMIT


def _run_all_honest(seed, n_values=3):
    rng = Random(seed)
    params = ConsensusParams(values=tuple(range(1, n_values + 1)), delta=3)
    cfg = NetConfig(gst=rng.randint(0, 20), post_gst_bound=2, seed=seed, random_delays=True,
                    pre_gst_max_delay=rng.randint(1, 10), max_time=3000)
    sim = new_sim(cfg, ANY3, Partition.of(ANY3, []), consensus_factory(params))
    props = {p: rng.randint(1, n_values) for p in (1, 2, 3, 4)}
    for p, v in props.items():
        sim.request(rng.randint(0, 5), p, "propose", v)
    sim.run_until_quiescent(lambda s: all(s.procs[p].decided is not None for p in s.procs))
    return sim, props


@pytest.mark.parametrize("seed", range(25))
def test_all_honest_runs_agree_and_decide_a_proposal(seed):
    sim, props = _run_all_honest(seed)
    ds = {p: sim.procs[p].decided for p in sim.procs}
    assert None not in ds.values()
    assert len(set(ds.values())) == 1
    assert set(ds.values()) <= set(props.values())
    for st in sim.procs.values():
        assert st.prepared_log == sorted(st.prepared_log)


def test_same_proposal_is_decided():
    params = ConsensusParams(values=V5)
    sim = new_sim(NetConfig(), ANY3, Partition.of(ANY3, []), consensus_factory(params))
    for p in (1, 2, 3, 4):
        sim.request(0, p, "propose", 4)
    sim.run_until_quiescent(lambda s: all(s.procs[p].decided is not None for p in s.procs))
    assert {st.decided for st in sim.procs.values()} == {4}


def test_changeleader_run():
    res = run(load_scenario("consensus-changeleader"))
    assert res.ok, [c for c in res.checks if not c.ok]
    st = {p: res.sim.procs[p] for p in (1, 3, 4)}
    assert st[3].decided == st[4].decided == 2
    assert st[3].decided_ballot == st[4].decided_ballot == Ballot(3, 2)
    assert st[1].decided is None
    names = {c.name for c in res.checks}
    assert "@100 prepared_trajectory[3]" in names and "@100 prepared_trajectory[1]" in names


def test_last_minute_attack_round_gap():
    res = run(load_scenario("last-minute-attack"))
    assert res.ok, [c for c in res.checks if not c.ok]
    slow, fast = res.variants["delta0"], res.variants["delta3"]
    rs, rf = decision_round(slow), decision_round(fast)
    assert rf is not None and rs is not None and rs - rf >= 2


def test_unprepared_commit_lock_blocks_termination():
    res = run(load_scenario("unprepared-commit-lock"))
    assert res.ok, [c for c in res.checks if not c.ok]
    assert all(res.sim.procs[p].decided is None for p in (2, 3, 4))
    assert max(st.round for st in res.sim.procs.values()) >= 7
