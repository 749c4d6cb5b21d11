import numpy as np
import pytest

from peptaste import _tables
from peptaste.descriptors import (
    DESCRIPTOR_IDS,
    DescriptorConfig,
    FeatureScaler,
    column_names,
    descriptor_dims,
    encode,
    encode_matrix,
    encode_set,
)
from peptaste.errors import ValidationError
from peptaste.sequences import AMINO_ACIDS, Peptide

COMPOSITION_IDS = ("AAC", "DPC", "TPC", "GAAC", "GDPC", "GTPC")

RNG = np.random.default_rng(3)


def random_seq(lo=3, hi=25):
    return "".join(RNG.choice(list(AMINO_ACIDS), size=RNG.integers(lo, hi + 1)))


class TestDimensions:
    def test_table_matches_contract(self):
        dims = descriptor_dims()
        assert dims["AAC"] == 20
        assert dims["DPC"] == 400
        assert dims["TPC"] == 8000
        assert dims["GAAC"] == 5
        assert dims["GDPC"] == 25
        assert dims["GTPC"] == 125
        assert dims["CTDC"] == 39
        assert dims["CTDT"] == 39
        assert dims["CTDD"] == 195
        assert dims["CTriad"] == 343
        assert dims["EAAC"] == 420
        assert dims["EGAAC"] == 105
        assert dims["CKSAAP"] == 1600
        assert dims["CKSAAGP"] == 100
        assert dims["Binary"] == 500
        assert dims["BLOSUM62"] == 500
        assert dims["DDE"] == 400
        assert dims["PAAC"] == 21
        assert dims["APAAC"] == 22
        assert dims["Zscale"] == 125

    def test_sum_matches_table_oracle(self):
        # oracle: summation of the per-descriptor dimension table
        dims = descriptor_dims()
        assert sum(dims.values()) == sum(dims[d] for d in DESCRIPTOR_IDS) == 12984

    def test_every_encoding_has_declared_dimension(self):
        dims = descriptor_dims()
        for did in DESCRIPTOR_IDS:
            for seq in ("ACD", "ACDEFGHIKLMNPQRSTVWY", random_seq()):
                assert encode(did, seq).shape == (dims[did],)

    def test_column_names_cover_every_column(self):
        names = column_names(DESCRIPTOR_IDS)
        assert len(names) == sum(descriptor_dims().values())
        assert len(set(names)) == len(names)


class TestSpotValues:
    def test_aac_homopolymer(self):
        v = encode("AAC", "AAAA")
        assert v[0] == 1.0 and v[1:].sum() == 0.0

    def test_dpc_dipeptide(self):
        v = encode("DPC", "AA")
        assert v[0] == 1.0 and v.sum() == pytest.approx(1.0)

    def test_gaac_positive_group(self):
        v = encode("GAAC", "KRH")
        assert v.tolist() == [0.0, 0.0, 1.0, 0.0, 0.0]

    def test_binary_layout(self):
        v = encode("Binary", "AC").reshape(25, 20)
        assert v[0, 0] == 1.0 and v[0].sum() == 1.0
        assert v[1, 1] == 1.0
        assert v[2:].sum() == 0.0

    def test_blosum62_rows_match_bundled_table(self):
        table = _tables.matrix_table("blosum62.tsv")
        cols = list(next(iter(table.values())))
        v = encode("BLOSUM62", "WA").reshape(25, 20)
        assert v[0].tolist() == [table["W"][c] for c in cols]
        assert v[0][cols.index("W")] == 11.0
        assert v[1].tolist() == [table["A"][c] for c in cols]

    def test_zscale_first_position(self):
        z = _tables.vector_table("zscale.tsv")
        v = encode("Zscale", "AC").reshape(25, 5)
        assert v[0].tolist() == list(z["A"])
        assert v[2:].sum() == 0.0

    def test_dde_against_direct_formula(self):
        codons = _tables.scalar_table("codon_counts.tsv")
        seq = "ACDA"
        v = encode("DDE", seq)
        # dipeptide AC sits at index 0*20+1
        dc = 1 / 3
        tm = (codons["A"] / 61) * (codons["C"] / 61)
        tv = tm * (1 - tm) / 3
        assert v[1] == pytest.approx((dc - tm) / np.sqrt(tv), abs=1e-12)

    def test_ctdc_charge_property(self):
        # charge partition: group1 = KR, group3 = DE
        v = encode("CTDC", "KKDE")
        props = [p for p, _ in _tables.ctd_groups()]
        base = props.index("charge") * 3
        assert v[base + 0] == pytest.approx(0.5)  # K,K
        assert v[base + 1] == pytest.approx(0.0)
        assert v[base + 2] == pytest.approx(0.5)  # D,E

    def test_ctriad_dimension_and_normalization(self):
        v = encode("CTriad", "AGV")
        assert v.shape == (343,)
        assert v.max() <= 1.0

    def test_paac_reduces_to_composition_shape(self):
        v = encode("PAAC", "ACDE")
        assert v.shape == (21,)
        assert np.all(v[:20] >= 0)

    def test_cksaap_short_sequence_zero_blocks(self):
        # dipeptide has no pairs at gaps 1..3: those blocks stay zero
        v = encode("CKSAAP", "AC").reshape(4, 400)
        assert v[0].sum() == pytest.approx(1.0)
        assert v[1:].sum() == 0.0


class TestPreconditions:
    def test_tpc_needs_three(self):
        with pytest.raises(ValidationError, match="TPC"):
            encode("TPC", "AC")

    def test_ctriad_needs_three(self):
        with pytest.raises(ValidationError, match="CTriad"):
            encode("CTriad", "AC")

    def test_positional_needs_pad_len(self):
        long = "A" * 26
        for did in ("Binary", "BLOSUM62", "Zscale", "EAAC", "EGAAC"):
            with pytest.raises(ValidationError, match=did):
                encode(did, long)

    def test_unknown_descriptor(self):
        with pytest.raises(ValidationError, match="unknown"):
            encode("NOPE", "ACD")


class TestProperties:
    def test_composition_descriptors_sum_to_one(self):
        for _ in range(200):
            seq = random_seq()
            for did in COMPOSITION_IDS:
                v = encode(did, seq)
                assert np.all(v >= 0)
                assert v.sum() == pytest.approx(1.0, abs=1e-12)

    def test_order_free_vs_order_sensitive(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            seq = random_seq(5, 20)
            perm = "".join(rng.permutation(list(seq)))
            assert np.array_equal(encode("AAC", seq), encode("AAC", perm))
            assert np.array_equal(encode("GAAC", seq), encode("GAAC", perm))
            if perm != seq:
                assert not np.array_equal(encode("Binary", seq), encode("Binary", perm))
                assert not np.array_equal(
                    encode("BLOSUM62", seq), encode("BLOSUM62", perm)
                )

    def test_pure_function(self):
        seq = random_seq()
        for did in DESCRIPTOR_IDS:
            assert np.array_equal(encode(did, seq), encode(did, seq))


class TestFeatureAssembly:
    def test_reference_combo_width(self):
        ids = ("BLOSUM62", "CTDD", "DPC", "AAC")
        m = encode_matrix(ids, [Peptide("ACDE"), Peptide("KLMN")])
        assert m.shape == (2, 1115)

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValidationError, match="duplicates"):
            encode_matrix(["AAC", "AAC"], [Peptide("ACDE")])

    def test_zscore_on_fit_rows(self):
        peps = [Peptide(random_seq(4, 10)) for _ in range(30)]
        fm = encode_set(("AAC", "GAAC"), peps, fit_rows=range(20))
        fit_block = fm.values[:20]
        live = fit_block.std(axis=0) > 0
        assert np.allclose(fit_block.mean(axis=0), 0.0, atol=1e-9)
        assert np.allclose(fit_block[:, live].std(axis=0), 1.0, atol=1e-9)

    def test_constant_column_becomes_zero(self):
        rows = np.array([[1.0, 2.0], [1.0, 3.0], [1.0, 4.0]])
        scaler = FeatureScaler.fit(rows)
        out = scaler.transform(rows)
        assert np.all(out[:, 0] == 0.0)

    def test_transform_peptides_matches_training_rows(self):
        peps = [Peptide(random_seq(4, 10)) for _ in range(10)]
        fm = encode_set(("AAC", "CTDC"), peps)
        again = fm.transform_peptides(peps)
        assert np.allclose(fm.values, again)

    def test_window_dims_follow_config(self):
        cfg = DescriptorConfig(pad_len=20, window=4)
        dims = descriptor_dims(cfg)
        assert dims["EAAC"] == (20 - 4 + 1) * 20
        assert dims["Binary"] == 400
        assert encode("EAAC", "ACDE", cfg).shape == (dims["EAAC"],)
