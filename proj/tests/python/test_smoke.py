import math

import pytest

import reactordb


def test_predict_trend_fixed_points():
    assert reactordb.predict_trend([5, 5, 5, 5]) == pytest.approx(5.0, abs=1e-12)
    assert reactordb.predict_trend([0, 2]) == pytest.approx(2.0, abs=1e-12)
    assert reactordb.predict_trend([]) == 0.0


def test_predict_trend_matches_two_pass():
    window = [3, 1, 4, 1, 5, 9, 2, 6]
    mean = sum(window) / len(window)
    var = sum((x - mean) ** 2 for x in window) / len(window)
    assert reactordb.predict_trend(window) == pytest.approx(mean + math.sqrt(var), rel=1e-12)


def test_zipf_sampler_degenerate_and_deterministic():
    z = reactordb.ZipfSampler(theta=0.5, n=1, seed=3)
    assert z.sample_many(50) == [0] * 50

    a = reactordb.ZipfSampler(theta=0.99, n=8, seed=7)
    b = reactordb.ZipfSampler(theta=0.99, n=8, seed=7)
    assert a.sample_many(200) == b.sample_many(200)

    steep = reactordb.ZipfSampler(theta=5.0, n=8, seed=1)
    assert steep.probability(0) == pytest.approx(0.96443, abs=1e-4)
    draws = steep.sample_many(2000)
    assert draws.count(0) / len(draws) > 0.9


def test_engine_end_to_end_interaction():
    eng = reactordb.Engine(deployment="async", sections=2, items=50, history=20,
                           carts=1, scan_window=10, trace=True)
    added = eng.add_items(cart=0, customer=0, sections=[0, 1], items=[3, 4], qtys=[1, 1])
    assert added["ok"] and added["committed"]
    assert added["value"][0] > 0

    out = eng.checkout(cart=0)
    assert out["ok"] and out["committed"]
    # async: the front container plus one per touched section
    assert out["containers_spanned"] == [0, 1, 2]
    assert eng.stock(0, 3) == 10_000 - 1
    assert eng.stock(1, 4) == 10_000 - 1

    ok, detail, replayed = eng.verify()
    assert ok, detail
    assert replayed == eng.counters()["commits"]


def test_engine_insufficient_stock_aborts_atomically():
    eng = reactordb.Engine(sections=2, items=10, history=5, carts=1, scan_window=5)
    added = eng.add_items(cart=0, customer=1, sections=[0, 1], items=[2, 2], qtys=[1, 10**9])
    assert added["committed"]
    out = eng.checkout(cart=0)
    assert not out["ok"]
    assert not out["committed"]
    assert eng.stock(0, 2) == 10_000  # the feasible line rolled back too


def test_run_workload_epochs_shape():
    rows = reactordb.run_workload(deployment="sync", workers=1, order_size=4,
                                  sections=2, scan_window=10, epochs=1,
                                  epoch_secs=0.3, warmup=0, verify=False)
    assert len(rows) == 1
    row = rows[0]
    assert row["committed"] > 0
    assert row["throughput_ips"] > 0
    assert row["committed"] + row["aborted"] > 0
