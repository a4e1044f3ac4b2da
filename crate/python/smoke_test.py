import math

import diffc


def test_gaussian_analytics():
    unit = diffc.Spectrum([1.0])
    p = diffc.rd_point(unit, "DiffC-A", 0.5)
    assert abs(p.distortion - 0.5) < 1e-12
    assert abs(p.rate_bits - 1.0) < 1e-12
    theta, parts = diffc.waterfill(diffc.Spectrum([4.0, 1.0]), 2.0)
    assert abs(theta - 1.0) < 1e-9 and parts == [1.0, 1.0]
    assert abs(diffc.gaussian_rdf(diffc.Spectrum([4.0, 1.0]), 2.0) - 1.0) < 1e-9
    c = 1000.0
    assert diffc.chunk_overhead(c, 40.0) == c / 40.0 * (40.0 + math.log2(41.0) + 5.0)


def test_codec_round_trip():
    source = diffc.Source.symmetric_pair(2.0, 0.25)
    schedule = diffc.Schedule("cosine", 100)
    t_stop = schedule.nearest_step(0.5)
    data, kl_bits, ledger = diffc.encode([0.8], source, schedule, t_stop, seed=3)
    assert data[:4] == b"DIFC" and kl_bits > 0
    assert ledger.startswith("record,step,")
    z = diffc.decode(data, source, recon="z")
    x_hat = diffc.decode(data, source)
    assert len(z) == 1 and len(x_hat) == 1 and math.isfinite(x_hat[0])
    try:
        diffc.decode(data[:-1], source)
    except ValueError as e:
        assert "framing" in str(e)
    else:
        raise AssertionError("truncated stream decoded")


def test_harness():
    g, se = diffc.estimate_g(diffc.Source.gaussian(diffc.Spectrum([1.0, 1.0])), 0.5, 20000, 1)
    assert abs(g - 1.0) < 3 * se
    ok, lines = diffc.verify("g", 1, 20000)
    assert ok and all(len(line.split(",")) == 7 for line in lines)


if __name__ == "__main__":
    test_gaussian_analytics()
    test_codec_round_trip()
    test_harness()
    print("smoke test passed")
