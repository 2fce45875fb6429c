import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image as PILImage

from degcraft.errors import DecodeError, SizingError
from degcraft.imagecore import (
    Image, ImageSet, crop, extract_patches, load_dir, load_image, psnr, save_image,
)
from degcraft.rng import make_rng


def test_load_black_png(tmp_path):
    path = tmp_path / "black.png"
    PILImage.fromarray(np.zeros((2, 2, 3), np.uint8)).save(path)
    img = load_image(path)
    assert (img.width, img.height, img.channels) == (2, 2, 3)
    assert np.all(img.data == 0.0)


def test_load_white_png(tmp_path):
    path = tmp_path / "white.png"
    PILImage.fromarray(np.full((1, 1, 3), 255, np.uint8)).save(path)
    img = load_image(path)
    assert img.channels == 3 and np.all(img.data == 255.0)


def test_grayscale_stays_single_channel(tmp_path):
    path = tmp_path / "g.png"
    PILImage.fromarray(np.full((3, 4), 7, np.uint8), mode="L").save(path)
    img = load_image(path)
    assert img.channels == 1 and img.width == 4 and img.height == 3


def test_mixed_directory_promotes_gray(tmp_path):
    PILImage.fromarray(np.full((4, 4), 9, np.uint8), mode="L").save(tmp_path / "a.png")
    PILImage.fromarray(np.zeros((4, 4, 3), np.uint8)).save(tmp_path / "b.png")
    s = load_dir(tmp_path)
    assert [im.channels for im in s] == [3, 3]
    assert np.all(s[0].data == 9.0)


def test_zero_image_png(tmp_path):
    path = tmp_path / "z.png"
    save_image(Image(np.zeros((5, 6, 3))), path)
    assert np.all(load_image(path).data == 0)


@settings(max_examples=30, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(1, 12), st.integers(1, 12), st.sampled_from([1, 3]))))
def test_png_round_trip_exact(tmp_path_factory, pixels):
    path = tmp_path_factory.mktemp("rt") / "x.png"
    img = Image(pixels.astype(np.float64))
    save_image(img, path)
    assert load_image(path) == img


def test_ramp_png_round_trip(tmp_path, ramp):
    img = ramp(17, 23)
    save_image(img, tmp_path / "r.png")
    assert load_image(tmp_path / "r.png") == img


def test_save_rounds_half_away_from_zero(tmp_path):
    img = Image(np.array([[[0.5, 1.49, 254.5]]]))
    save_image(img, tmp_path / "h.png")
    assert load_image(tmp_path / "h.png").data.tolist() == [[[1.0, 1.0, 255.0]]]


def test_jpeg_file_quality_ordering(tmp_path, natural_patch):
    save_image(natural_patch, tmp_path / "q95.jpg", "JPEG", 95)
    save_image(natural_patch, tmp_path / "q30.jpg", "JPEG", 30)
    hi = psnr(natural_patch, load_image(tmp_path / "q95.jpg"))
    lo = psnr(natural_patch, load_image(tmp_path / "q30.jpg"))
    assert hi > lo


def test_sixteen_bit_png_rejected(tmp_path):
    path = tmp_path / "deep.png"
    PILImage.fromarray(np.full((2, 2), 1000, np.uint16)).save(path)
    with pytest.raises(DecodeError, match="deep.png"):
        load_image(path)


def test_garbage_file_names_path(tmp_path):
    path = tmp_path / "junk.png"
    path.write_bytes(b"not an image")
    with pytest.raises(DecodeError, match="junk.png"):
        load_image(path)


def test_missing_file(tmp_path):
    with pytest.raises(DecodeError, match="nope.png"):
        load_image(tmp_path / "nope.png")


def test_patch_of_exact_size_is_identity(small_corpus):
    img = crop(small_corpus[1], 0, 0, 72)
    out = extract_patches(ImageSet([img]), 72, 1, make_rng(3))
    assert len(out) == 1 and out[0] == img


def test_hundred_images_give_hundred_patches():
    imgs = ImageSet([Image(np.full((80, 90, 3), float(i))) for i in range(100)])
    out = extract_patches(imgs, 72, 1, make_rng(0))
    assert len(out) == 100
    assert all((p.width, p.height) == (72, 72) for p in out)
    # order follows the source order
    assert [p.data[0, 0, 0] for p in out] == [float(i) for i in range(100)]


def test_patches_deterministic_and_inside(small_corpus):
    a = extract_patches(small_corpus, 72, 3, make_rng(42))
    b = extract_patches(small_corpus, 72, 3, make_rng(42))
    assert all(x == y for x, y in zip(a, b)) and a.origins == b.origins
    for patch, (i, top, left) in zip(a, a.origins):
        src = small_corpus[i]
        assert 0 <= top <= src.height - 72 and 0 <= left <= src.width - 72
        assert patch == crop(src, top, left, 72)


def test_patch_sizing_error_names_index():
    imgs = ImageSet([Image(np.zeros((80, 80, 3))), Image(np.zeros((50, 80, 3)))])
    with pytest.raises(SizingError, match="image 1"):
        extract_patches(imgs, 72, 1, make_rng(0))


def test_crop_outside_image_rejected():
    img = Image(np.zeros((20, 30, 3)))
    assert crop(img, 0, 10, 20).width == 20
    for args in ((1, 0, 20), (0, 11, 20), (-1, 0, 5)):
        with pytest.raises(SizingError):
            crop(img, *args)


def test_procedural_corpus_deterministic(tmp_path):
    from degcraft.corpus import make_corpus, write_corpus
    a, b = make_corpus(3, seed=8, size=48), make_corpus(3, seed=8, size=48)
    assert all(x == y for x, y in zip(a, b))
    assert a[0] != make_corpus(1, seed=9, size=48)[0]
    for im in a:
        assert (im.height, im.width, im.channels) == (48, 48, 3)
        assert im.data.min() >= 0 and im.data.max() <= 255
        assert np.array_equal(im.data, np.round(im.data))
    paths = write_corpus(tmp_path, 3, seed=8, size=48)
    assert [load_image(p) for p in paths] == list(a)
