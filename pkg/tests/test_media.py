import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nlmc.grid import build_grid
from nlmc.media import (
    MediaError,
    MediaField,
    Polyline,
    Rect,
    generate_channelized,
    load_grid_field,
    load_media,
    partition_continua,
    rasterize,
    save_grid_field,
    save_media,
    uniform_media,
)
from oracles import flood_fill_components


def test_unit_contrast_is_uniform():
    g = build_grid(4, 4)
    m = generate_channelized(g, 1.0, seed=0)
    assert m.contrast(1) == m.contrast(2) == 1.0
    assert np.all(m.kappa1 == 1.0)


@pytest.mark.parametrize("seed", [0, 1, 7])
def test_contrast_exact(seed):
    m = generate_channelized(build_grid(8, 16), 1e4, seed=seed)
    assert m.contrast(1) == 1e4
    assert m.contrast(2) == 1e4
    assert set(np.unique(m.kappa1)) == {1.0, 1e4}


def test_generator_defaults_and_determinism():
    g = build_grid(4, 16)
    a = generate_channelized(g, 1e4, seed=5)
    b = generate_channelized(g, 1e4, seed=5)
    for name in ("kappa1", "kappa2", "sigma", "c1", "c2"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()
    assert not np.array_equal(a.kappa1, a.kappa2)
    assert np.all(a.sigma == 1.0) and np.all(a.c1 == 1.0) and np.all(a.c2 == 1.0)
    assert a.digest() == b.digest()
    assert generate_channelized(g, 1e4, seed=6).digest() != a.digest()


def test_explicit_channels_spec():
    g = build_grid(2, 4)
    spec = {"kappa1": [Rect(0, 2, 8, 3)], "kappa2": [Polyline(((1, 0), (1, 7)))]}
    m = generate_channelized(g, 100.0, seed=0, channels_spec=spec)
    assert np.all(m.kappa1[:, 2] == 100.0) and np.count_nonzero(m.kappa1 == 100.0) == 8
    assert np.all(m.kappa2[1, :] == 100.0) and np.count_nonzero(m.kappa2 == 100.0) == 8


def test_spec_without_background_rejected():
    g = build_grid(1, 4)
    with pytest.raises(MediaError):
        generate_channelized(g, 10.0, channels_spec={"kappa1": [Rect(0, 0, 4, 4)]})


def test_diagonal_polyline_is_four_connected():
    mask = rasterize([Polyline(((0, 0), (5, 7)))], 8)
    comps = flood_fill_components(mask)
    assert len(comps) == 1
    assert mask[0, 0] and mask[5, 7]


def test_invariants_enforced():
    ones = np.ones((2, 2))
    with pytest.raises(MediaError):
        MediaField(ones * 0, ones, ones, ones, ones)
    with pytest.raises(MediaError):
        MediaField(ones, ones, -ones, ones, ones)
    with pytest.raises(MediaError):
        MediaField(ones, ones, ones, ones, np.ones((3, 3)))


def test_grid_field_round_trip(tmp_path, rng):
    values = rng.random((2, 2)) * 10.0 ** rng.integers(-5, 5, (2, 2))
    save_grid_field(tmp_path / "f.txt", values)
    back = load_grid_field(tmp_path / "f.txt")
    assert np.array_equal(back, values)
    assert (tmp_path / "f.txt").read_text().splitlines()[0] == "2 2"


def test_media_round_trip(tmp_path):
    g = build_grid(2, 3)
    m = generate_channelized(g, 1e4, seed=3).with_sigma(0.37)
    save_media(m, tmp_path / "media.txt")
    back = load_media(tmp_path / "media.txt", g)
    for name in ("kappa1", "kappa2", "sigma", "c1", "c2"):
        assert np.array_equal(getattr(back, name), getattr(m, name))


def test_zero_permeability_file_rejected(tmp_path):
    g = build_grid(1, 2)
    save_media(uniform_media(g), tmp_path / "media.txt")
    (tmp_path / "media_kappa1.txt").write_text("2 2\n1 0\n1 1\n")
    with pytest.raises(MediaError, match="positive"):
        load_media(tmp_path / "media.txt", g)


def test_dimension_mismatch_rejected(tmp_path):
    g = build_grid(16, 16)
    save_media(uniform_media(build_grid(1, 2)), tmp_path / "media.txt")
    cols = " ".join(["1"] * 255)
    (tmp_path / "media_kappa1.txt").write_text("256 255\n" + "\n".join([cols] * 256) + "\n")
    with pytest.raises(MediaError, match="shape"):
        load_media(tmp_path / "media.txt", g)


@pytest.mark.parametrize("body", ["2 2\n1 1\n1\n", "2 2\n1 1\n", "two two\n", "1 2\n1 x\n"])
def test_malformed_rows(tmp_path, body):
    (tmp_path / "f.txt").write_text(body)
    with pytest.raises(MediaError):
        load_grid_field(tmp_path / "f.txt")


def test_single_mode_partition():
    g = build_grid(3, 4)
    part = partition_continua(g, generate_channelized(g, 1e4, seed=1), "single")
    assert np.all(part.counts == 1)
    for j in range(g.num_coarse):
        assert part.areas(1, j).tolist() == [g.coarse_area]


def test_uniform_field_has_no_channels():
    g = build_grid(2, 8)
    part = partition_continua(g, uniform_media(g), "channelized", threshold=1e2)
    assert np.all(part.counts == 1)


def test_one_channel_gives_two_subregions():
    g = build_grid(1, 8)
    m = generate_channelized(g, 1e4, channels_spec={"kappa1": [Rect(3, 0, 4, 8)], "kappa2": []})
    part = partition_continua(g, m, "channelized")
    assert part.counts[0, 0] == 2
    assert part.counts[1, 0] == 1
    assert part.cells(1, 0, 1).tolist() == list(range(24, 32))


def test_two_segments_give_three_subregions():
    g = build_grid(1, 8)
    spec = {"kappa1": [Rect(1, 1, 2, 7), Rect(5, 0, 6, 4)], "kappa2": []}
    m = generate_channelized(g, 1e4, channels_spec=spec)
    expected = len(flood_fill_components(m.kappa1 >= 100.0)) + 1
    assert expected == 3
    assert partition_continua(g, m, "channelized").counts[0, 0] == expected


def test_all_channel_block_has_no_matrix():
    g = build_grid(2, 2)
    spec = {"kappa1": [Rect(0, 0, 2, 2)], "kappa2": []}
    part = partition_continua(g, generate_channelized(g, 10.0, channels_spec=spec), "channelized")
    assert part.counts[0, 0] == 1
    assert part.counts[0, 1] == 1


def test_invalid_mode():
    g = build_grid(1, 2)
    with pytest.raises(ValueError):
        partition_continua(g, uniform_media(g), "spectral")


@given(
    mask=arrays(bool, (8, 8)),
    refine=st.sampled_from([2, 4, 8]),
)
@settings(max_examples=60, deadline=None)
def test_channel_components_match_flood_fill(mask, refine):
    nc = 8 // refine
    g = build_grid(nc, refine)
    kappa = np.where(mask, 1e4, 1.0)
    if mask.all():
        return
    m = MediaField(kappa, kappa, np.ones((8, 8)), np.ones((8, 8)), np.ones((8, 8)))
    part = partition_continua(g, m, "channelized", threshold=100.0)
    for j in range(g.num_coarse):
        R, C = divmod(j, nc)
        sub = mask[R * refine : (R + 1) * refine, C * refine : (C + 1) * refine]
        comps = flood_fill_components(sub)
        has_matrix = not sub.all()
        assert part.counts[0, j] == max(len(comps) + has_matrix, 1)
        # every flood-fill component is exactly one labelled sub-region
        labels = part.labels[0].reshape(8, 8)[R * refine : (R + 1) * refine, C * refine : (C + 1) * refine]
        for comp in comps:
            values = {labels[r, c] for r, c in comp}
            assert len(values) == 1
        if has_matrix and comps:
            assert set(np.unique(labels[~sub])) == {0}
        assert part.areas(1, j).sum() == pytest.approx(g.coarse_area)
