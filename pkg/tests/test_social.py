import json
import urllib.request

import numpy as np
import pytest

from sof.errors import CorruptCorpus, ServerUnreachable
from sof.harness.synth import generate_corpus
from sof.social.corpus import load_corpus_index
from sof.social.ingest import fetch_pages, ingest
from sof.social.server import GraphServer


@pytest.fixture(scope="module")
def corpus25(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus25")
    # 5 identities x 5 chips = 25 photos, one tag each
    generate_corpus(5, 5, seed=3, out_dir=out)
    return out


@pytest.fixture(scope="module")
def server25(corpus25):
    with GraphServer(corpus25) as server:
        yield server


def get_json(url):
    with urllib.request.urlopen(url, timeout=10) as resp:
        return json.loads(resp.read())


class TestPagination:
    def test_pages_of_ten_split_25_into_10_10_5(self, server25):
        sizes = []
        after = ""
        while True:
            url = f"{server25.endpoint}/photos?limit=10"
            if after:
                url += f"&after={after}"
            doc = get_json(url)
            sizes.append(len(doc["data"]))
            if "next" not in doc["paging"]:
                break
            after = doc["paging"]["next"]
        assert sizes == [10, 10, 5]

    def test_empty_corpus_single_empty_page(self, tmp_path):
        (tmp_path / "photos.jsonl").write_text("")
        with GraphServer(tmp_path) as server:
            doc = get_json(f"{server.endpoint}/photos?limit=10")
        assert doc["data"] == [] and "next" not in doc["paging"]

    def test_cursor_replay_is_stable(self, server25):
        first = get_json(f"{server25.endpoint}/photos?limit=10")
        cursor = first["paging"]["next"]
        page_a = get_json(f"{server25.endpoint}/photos?limit=10&after={cursor}")
        page_b = get_json(f"{server25.endpoint}/photos?limit=10&after={cursor}")
        assert page_a == page_b

    def test_union_of_pages_is_corpus_without_duplicates(self, corpus25, server25):
        seen = [p.photo_id for p in fetch_pages(server25.endpoint, limit=7)]
        expected = [p.photo_id for p in load_corpus_index(corpus25)]
        assert seen == expected
        assert len(set(seen)) == len(seen)

    def test_malformed_corpus_rejected(self, tmp_path):
        (tmp_path / "photos.jsonl").write_text('{"photo_id": "p1"}\n')
        with pytest.raises(CorruptCorpus):
            GraphServer(tmp_path)

    def test_bad_limit_is_400(self, server25):
        with pytest.raises(urllib.error.HTTPError) as err:
            get_json(f"{server25.endpoint}/photos?limit=0")
        assert err.value.code == 400


class TestIngest:
    def test_two_consented_identities_counted_exactly(self, tmp_path):
        out = tmp_path / "c2x10"
        generate_corpus(2, 10, seed=9, out_dir=out)
        with GraphServer(out) as server:
            chips, report = ingest(server.endpoint,
                                   {"person_00", "person_01"})
        assert report.photos_seen == 20
        assert report.faces_ingested == 20
        assert report.per_person == {"person_00": 10, "person_01": 10}
        assert len(chips) == 20
        assert all(r.source == "social" for r in chips)

    def test_consent_exclusion_skips_everything(self, tmp_path):
        out = tmp_path / "c3"
        generate_corpus(3, 4, seed=5, out_dir=out)
        with GraphServer(out) as server:
            chips, report = ingest(server.endpoint, {"somebody_else"})
        assert len(chips) == 0
        assert report.faces_ingested == 0
        assert report.faces_skipped_consent == 12

    def test_double_ingest_adds_nothing(self, tmp_path):
        out = tmp_path / "c2"
        generate_corpus(2, 6, seed=2, out_dir=out)
        seen = set()
        with GraphServer(out) as server:
            _, first = ingest(server.endpoint, {"person_00", "person_01"},
                              already_ingested=seen)
            again, second = ingest(server.endpoint, {"person_00", "person_01"},
                                   already_ingested=seen)
        assert first.faces_ingested == 12
        assert second.faces_ingested == 0
        assert second.duplicates_skipped == first.faces_ingested
        assert len(again) == 0

    def test_consent_safety_property(self, tmp_path):
        out = tmp_path / "c4"
        generate_corpus(4, 3, seed=8, out_dir=out)
        consent = {"person_00", "person_02"}
        with GraphServer(out) as server:
            chips, _ = ingest(server.endpoint, consent)
        assert {r.person_id for r in chips} <= consent

    def test_alignment_error_skips_face(self, tmp_path):
        out = tmp_path / "cbad"
        generate_corpus(2, 3, seed=4, out_dir=out)
        # corrupt one record's landmarks into a collinear triple
        lines = (out / "photos.jsonl").read_text().splitlines()
        doc = json.loads(lines[0])
        doc["tags"][0]["landmarks"] = {"le": [10, 10], "re": [20, 10], "nose": [30, 10]}
        lines[0] = json.dumps(doc)
        (out / "photos.jsonl").write_text("\n".join(lines) + "\n")
        with GraphServer(out) as server:
            chips, report = ingest(server.endpoint, {"person_00", "person_01"})
        assert report.faces_skipped_error == 1
        assert report.faces_ingested == 5

    def test_unreachable_server_retries_then_fails(self):
        with pytest.raises(ServerUnreachable):
            ingest("http://127.0.0.1:9", {"x"}, backoff_base=0.01)

    def test_empty_consent_rejected(self):
        with pytest.raises(ValueError):
            ingest("http://127.0.0.1:9", set())


class TestGeneratedCorpus:
    def test_corpus_counts(self, tmp_path):
        out = tmp_path / "c5x10"
        generate_corpus(5, 10, seed=7, out_dir=out)
        photos = load_corpus_index(out)
        assert len(photos) == 50
        names = {t.tag_name for p in photos for t in p.tags}
        assert len(names) == 5
        assert sum(len(p.tags) for p in photos) == 50

    def test_same_seed_is_byte_identical(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        generate_corpus(3, 4, seed=11, out_dir=a)
        generate_corpus(3, 4, seed=11, out_dir=b)
        for name in sorted(p.name for p in a.iterdir()):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_landmarks_inside_images(self, tmp_path):
        out = tmp_path / "c"
        generate_corpus(2, 5, seed=1, out_dir=out)
        for photo in load_corpus_index(out):
            for tag in photo.tags:
                pts = np.array([tag.left_eye, tag.right_eye, tag.nose_tip])
                assert pts.min() >= 0 and pts.max() < 96
