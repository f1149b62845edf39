import random

import _dxnat


def test_pixel_from_speed_anchors():
    assert _dxnat.pixel_from_speed(0.0) == 255
    assert _dxnat.pixel_from_speed(40.0) == 128
    assert _dxnat.pixel_from_speed(80.0) == 0
    assert _dxnat.pixel_from_speed(90.0) == 0
    assert _dxnat.pixel_from_speed(-3.0) == 0


def test_time_features_and_one_hot_agree():
    # 18:30 UTC on a January Sunday is 12:30 in Chicago.
    hour, weekday = _dxnat.time_features("2025-01-05T18:30:00Z", "America/Chicago")
    assert (hour, weekday) == (12, 0)
    vec = _dxnat.encode_time("2025-01-05T18:30:00Z", "America/Chicago")
    assert len(vec) == 31
    assert sum(vec) == 2
    assert vec[hour] == 1
    assert vec[24 + weekday] == 1


def test_crossover_identity_and_provenance():
    width = 8
    rng = random.Random(5)
    cands = [[rng.randrange(256) for _ in range(width * width)] for _ in range(4)]

    child = _dxnat.crossover(cands, width, base_index=1, p_m=0.0, seed=9)
    assert child == cands[1]

    rows_of = [
        {tuple(c[r * width : (r + 1) * width]) for c in cands} for r in range(width)
    ]
    for idx in range(20):
        child = _dxnat.crossover(cands, width, base_index=0, p_m=0.5, seed=9,
                                 offspring_index=idx)
        for r in range(width):
            assert tuple(child[r * width : (r + 1) * width]) in rows_of[r]

    a = _dxnat.crossover(cands, width, base_index=0, p_m=0.5, seed=9, offspring_index=3)
    b = _dxnat.crossover(cands, width, base_index=0, p_m=0.5, seed=9, offspring_index=3)
    assert a == b


def test_roc_sweep_matches_hand_count():
    result = _dxnat.roc_sweep([0.2, 0.4, 0.7, 0.9], [True, True, False, False])
    assert len(result["points"]) == 100
    assert result["chosen"] == 0.4
    for th, fpr, tpr in result["points"]:
        pos = sum(s <= th for s in (0.2, 0.4))
        neg = sum(s <= th for s in (0.7, 0.9))
        assert tpr == pos / 2
        assert fpr == neg / 2


def test_tci_file_round_trip(tmp_path):
    width = 16
    rng = random.Random(12)
    pixels = [rng.randrange(256) for _ in range(width * width)]
    path = str(tmp_path / "snapshot.pgm")
    _dxnat.write_tci(path, pixels, width, "2016-11-13T12:00:00Z", "g16@10m")
    back = _dxnat.read_tci(path)
    assert back["width"] == width
    assert back["pixels"] == pixels
    assert back["timestamp_iso"] == "2016-11-13T12:00:00Z"
    assert back["grid_id"] == "g16@10m"
