import pytest

from graftctr.data import (
    FileFormatError,
    ImpressionLog,
    StatVector,
    read_impressions,
    read_users,
    read_videos,
    write_impressions,
    write_users,
    write_videos,
    UserRecord,
)
from graftctr.validation import ValidationError
from graftctr.vocab import Vocabulary

from conftest import NOW, vrec


class TestStatVector:
    def test_clicks_cannot_exceed_views(self):
        with pytest.raises(ValidationError):
            StatVector(0.1, 10.0, 5.0, 11.0, 3.0)

    def test_ctr_range(self):
        with pytest.raises(ValidationError):
            StatVector(1.5, 10.0, 5.0, 1.0, 3.0)

    def test_non_finite_rejected(self):
        with pytest.raises(ValidationError):
            StatVector(0.1, float("nan"), 5.0, 1.0, 3.0)


class TestFileRoundTrips:
    def test_videos(self, tmp_path):
        videos = [vrec("v1", NOW - 5, tokens=("alpha", "beta")), vrec("v2", NOW - 9, product="")]
        path = tmp_path / "videos.tsv"
        write_videos(path, videos)
        assert read_videos(path) == videos

    def test_users(self, tmp_path):
        users = [UserRecord("u1", (0.25, -1.5)), UserRecord("u2", (0.0, 0.125))]
        path = tmp_path / "users.tsv"
        write_users(path, users)
        assert read_users(path) == users

    def test_impressions(self, tmp_path):
        imps = [
            ImpressionLog("i1", "u1", ("v1", "v2"), "v3", 1, NOW),
            ImpressionLog("i2", "u2", (), "v1", 0, NOW + 5),
        ]
        path = tmp_path / "imps.tsv"
        write_impressions(path, imps)
        assert read_impressions(path) == imps

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("v1\t123\n")
        with pytest.raises(FileFormatError):
            read_videos(path)

    def test_label_validated(self):
        with pytest.raises(ValidationError):
            ImpressionLog("i", "u", (), "v", 2, NOW)

    def test_reserved_delimiters_rejected(self):
        with pytest.raises(ValidationError):
            vrec("v|1", NOW)


class TestVocabulary:
    def test_round_trip(self, tmp_path):
        vocab = Vocabulary()
        for i in range(5):
            vocab.add("video", f"v{i}")
        vocab.add("author", "a1")
        vocab.add("user", "u1")
        path = tmp_path / "vocab.tsv"
        vocab.save(path)
        loaded = Vocabulary.load(path)
        assert loaded.size("video") == vocab.size("video")
        assert loaded.require("video", "v3") == vocab.require("video", "v3")
        assert loaded.external("author", 1) == "a1"

    def test_oov_lookup_is_zero(self):
        vocab = Vocabulary()
        assert vocab.lookup("video", "nope") == 0

    def test_add_is_idempotent(self):
        vocab = Vocabulary()
        first = vocab.add("video", "v1")
        assert vocab.add("video", "v1") == first

    def test_unknown_id_require_raises(self):
        with pytest.raises(ValidationError):
            Vocabulary().require("video", "ghost")
