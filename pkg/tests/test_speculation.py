"""Prediction-table speculation: hit/replay accounting and LRU behaviour."""

from collections import OrderedDict

from rclsim.speculation import PredictionTable, speculate_l1d, speculate_l1i


def test_first_touch_mispredicts_then_hits():
    pt = PredictionTable(8)
    cycles, correct = speculate_l1d(pt, page=5, true_hkey=0x13)
    assert (cycles, correct) == (2, False)
    cycles, correct = speculate_l1d(pt, page=5, true_hkey=0x13)
    assert (cycles, correct) == (0, True)
    assert pt.mispredictions == 1 and pt.hits == 1


def test_round_robin_over_capacity_always_mispredicts():
    # Independent LRU reference over e+1 pages with capacity e: each page is
    # evicted before its next use, so every access mispredicts.
    e = 4
    ref = OrderedDict()
    expected = []
    for i in range(3 * (e + 1)):
        page = i % (e + 1)
        expected.append(page in ref)
        if page in ref:
            ref.move_to_end(page)
        else:
            if len(ref) >= e:
                ref.popitem(last=False)
            ref[page] = True
    assert not any(expected)

    pt = PredictionTable(e)
    results = [
        speculate_l1d(pt, page=i % (e + 1), true_hkey=7)[1]
        for i in range(3 * (e + 1))
    ]
    assert results == expected
    assert pt.mispredictions == 3 * (e + 1)


def test_capacity_bound_and_flush():
    pt = PredictionTable(4)
    for page in range(10):
        speculate_l1d(pt, page, true_hkey=page)
        assert len(pt) <= 4
    pt.flush()
    assert len(pt) == 0
    # post-flush: everything mispredicts again
    assert speculate_l1d(pt, 9, true_hkey=9) == (2, False)


def test_stale_key_counts_as_misprediction():
    pt = PredictionTable(4)
    speculate_l1d(pt, page=1, true_hkey=0xA)
    cycles, correct = speculate_l1d(pt, page=1, true_hkey=0xB)  # key changed
    assert (cycles, correct) == (2, False)
    # table now carries the fresh key
    assert speculate_l1d(pt, page=1, true_hkey=0xB) == (0, True)


def test_ifetch_straight_line_same_page():
    pt = PredictionTable(8)
    cycles, correct, replay = speculate_l1i(pt, 0x2C, "predicted", 3, 0x2C)
    assert (cycles, correct, replay) == (0, True, False)


def test_ifetch_page_cross_queues_replay():
    pt = PredictionTable(8)
    cycles, correct, replay = speculate_l1i(pt, 0x2C, "predicted", 4, 0x31)
    assert (cycles, correct, replay) == (2, False, True)
    # the mismatch installed the key, so the requested path now hits
    assert speculate_l1i(pt, None, "requested", 4, 0x31) == (0, True, False)


def test_ifetch_colliding_keys_across_boundary_is_correct():
    # The check compares hash keys, not pages: a boundary cross between two
    # pages whose table entries collide never replays.
    pt = PredictionTable(8)
    assert speculate_l1i(pt, 0x11, "predicted", 8, 0x11) == (0, True, False)
    assert speculate_l1i(pt, 0x11, "predicted", 9, 0x11) == (0, True, False)
    assert pt.mispredictions == 0


def test_ifetch_requested_uses_table():
    pt = PredictionTable(8)
    cycles, correct, replay = speculate_l1i(pt, None, "requested", 2, 0x5)
    assert (cycles, correct, replay) == (2, False, False)
    assert speculate_l1i(pt, None, "requested", 2, 0x5)[1] is True


def test_configurable_penalty():
    pt = PredictionTable(8)
    assert speculate_l1d(pt, 0, 1, penalty=5) == (5, False)


def test_larger_table_never_more_mispredictions_on_looping_trace():
    # Same page sequence replayed against e = 4, 6, 8.
    sequence = []
    for i in range(300):
        sequence.append(i % 6)
        if i % 10 == 9:
            sequence.append(6 + (i * 7) % 16)

    def mispredicts(e):
        pt = PredictionTable(e)
        for page in sequence:
            speculate_l1d(pt, page, true_hkey=page & 0x3F)
        return pt.mispredictions

    m4, m6, m8 = mispredicts(4), mispredicts(6), mispredicts(8)
    assert m8 <= m6 <= m4
