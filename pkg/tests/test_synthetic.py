import itertools

from raretag.brat import EntityType, resolve_overlaps
from raretag.synthetic import (
    LEXICONS,
    SyntheticConfig,
    generate_corpus,
    write_corpus,
)


def read_pair_bytes(directory):
    return {
        p.name: p.read_bytes() for p in sorted(directory.rglob("*"))
        if p.is_file()
    }


class TestGeneration:
    def test_deterministic_for_seed(self, tmp_path):
        config = SyntheticConfig(seed=7, size=10)
        write_corpus(generate_corpus(config), tmp_path / "a",
                     config.holdout_fraction)
        write_corpus(generate_corpus(config), tmp_path / "b",
                     config.holdout_fraction)
        assert read_pair_bytes(tmp_path / "a") == read_pair_bytes(tmp_path / "b")

    def test_different_seeds_differ(self):
        a = generate_corpus(SyntheticConfig(seed=1, size=5))
        b = generate_corpus(SyntheticConfig(seed=2, size=5))
        assert [d.text for d in a] != [d.text for d in b]

    def test_surfaces_match_document_text(self):
        for doc in generate_corpus(SyntheticConfig(seed=3, size=20)):
            for ent in doc.entities:
                covered = " ".join(
                    doc.text[f.start : f.end] for f in ent.fragments
                )
                assert covered == ent.surface

    def test_zero_overlap_fraction_means_clean_resolution(self):
        config = SyntheticConfig(seed=4, size=30, overlap_fraction=0.0)
        for doc in generate_corpus(config):
            assert resolve_overlaps(doc).resolution_log == []

    def test_fractions_produce_phenomena(self):
        config = SyntheticConfig(seed=5, size=40, discontinuous_fraction=1.0,
                                 overlap_fraction=1.0)
        docs = generate_corpus(config)
        assert all(
            any(e.is_discontinuous() for e in d.entities) for d in docs
        )
        assert all(len(resolve_overlaps(d).resolution_log) == 1 for d in docs)

    def test_lexicons_disjoint_across_types(self):
        for a, b in itertools.combinations(EntityType, 2):
            words_a = {w for term in LEXICONS[a] for w in term.split()}
            words_b = {w for term in LEXICONS[b] for w in term.split()}
            assert not words_a & words_b, (a, b)

    def test_holdout_split_sizes(self, tmp_path):
        config = SyntheticConfig(seed=6, size=20, holdout_fraction=0.25)
        train_dir, heldout_dir = write_corpus(
            generate_corpus(config), tmp_path, config.holdout_fraction
        )
        assert len(list(train_dir.glob("*.txt"))) == 15
        assert len(list(heldout_dir.glob("*.txt"))) == 5

    def test_no_holdout_writes_flat(self, tmp_path):
        config = SyntheticConfig(seed=6, size=4, holdout_fraction=0.0)
        train_dir, heldout_dir = write_corpus(
            generate_corpus(config), tmp_path, 0.0
        )
        assert heldout_dir is None
        assert len(list(train_dir.glob("*.ann"))) == 4
