import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from obfuskit.attacks.memorization import (
    Codec,
    SecretPayload,
    bits_to_samples,
    lsb_capacity,
    lsb_decode,
    lsb_encode,
    memorization_attack_eval,
    samples_to_bits,
    sign_decode,
    sign_encode_train,
)
from obfuskit.dataset import SensitiveSelection, gen_blobs, split
from obfuskit.errors import ValidationError
from obfuskit.models import Model, ModelSpec, TrainConfig, accuracy, init_model, train
from obfuskit.obfuscate import IndividualParams
from oracles import clipped_noise_mae

DOMAIN = (0.0, 255.0)


class TestQuantizer:
    def test_msb_first(self):
        p = samples_to_bits([[255.0, 0.0, 1.0]], DOMAIN, 8)
        assert p.bits[:8].tolist() == [1] * 8
        assert p.bits[8:16].tolist() == [0] * 8
        assert p.bits[16:].tolist() == [0, 0, 0, 0, 0, 0, 0, 1]

    @settings(max_examples=40, deadline=None)
    @given(arrays(np.float64, (3, 5), elements=st.integers(0, 255).map(float)))
    def test_integer_pixels_roundtrip_exactly_at_8_bits(self, X):
        p = samples_to_bits(X, DOMAIN, 8)
        np.testing.assert_array_equal(bits_to_samples(p, DOMAIN), X)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 8), st.integers(1, 4), st.integers(1, 6), st.integers(0, 2**32))
    def test_bits_samples_bits_identity(self, b, count, dim, seed):
        bits = np.random.default_rng(seed).integers(0, 2, count * dim * b)
        payload = SecretPayload(bits, Codec(b, dim, count))
        again = samples_to_bits(bits_to_samples(payload, DOMAIN), DOMAIN, b)
        np.testing.assert_array_equal(again.bits, payload.bits)

    def test_one_bit_levels_are_domain_endpoints(self):
        p = samples_to_bits([[10.0, 200.0]], DOMAIN, 1)
        assert bits_to_samples(p, DOMAIN).tolist() == [[0.0, 255.0]]

    def test_codec_validation(self):
        with pytest.raises(ValidationError):
            Codec(9, 4, 1)
        with pytest.raises(ValidationError):
            Codec(8, 4, 1, sample_shape=(3, 3))
        with pytest.raises(ValidationError):
            SecretPayload(np.zeros(5), Codec(1, 4, 1))


class TestLSB:
    spec = ModelSpec.mlp(6, 3, 5)

    @pytest.mark.parametrize("k", [1, 8, 16, 20])
    def test_decode_inverts_encode(self, k):
        rng = np.random.default_rng(k)
        model = Model(self.spec, rng.normal(0, 1, self.spec.num_parameters))
        for _ in range(50):
            n = int(rng.integers(1, lsb_capacity(model, k) + 1))
            payload = SecretPayload(rng.integers(0, 2, n), Codec(1, n, 1))
            out = lsb_decode(lsb_encode(model, payload, k), payload.codec, k)
            np.testing.assert_array_equal(out.bits, payload.bits)

    @pytest.mark.parametrize("k", [1, 8, 16])
    def test_only_low_bits_change(self, k):
        rng = np.random.default_rng(0)
        model = Model(self.spec, rng.normal(0, 1, self.spec.num_parameters))
        n = lsb_capacity(model, k)
        enc = lsb_encode(model, SecretPayload(rng.integers(0, 2, n), Codec(1, n, 1)), k)
        high = ~np.uint64((1 << k) - 1)
        assert np.array_equal(enc.theta.view(np.uint64) & high, model.theta.view(np.uint64) & high)
        assert np.all(np.abs(enc.theta - model.theta) <= np.abs(model.theta) * 2.0 ** (k - 52))

    def test_unused_parameters_untouched(self):
        model = init_model(self.spec, 0)
        enc = lsb_encode(model, SecretPayload([1, 0, 1], Codec(1, 3, 1)), 2)
        assert np.array_equal(enc.theta[2:], model.theta[2:])
        assert np.array_equal(model.theta, init_model(self.spec, 0).theta)

    def test_capacity_and_k_checks(self):
        model = init_model(self.spec, 0)
        cap = lsb_capacity(model, 4)
        with pytest.raises(ValidationError):
            lsb_encode(model, SecretPayload(np.zeros(cap + 1), Codec(1, cap + 1, 1)), 4)
        with pytest.raises(ValidationError):
            lsb_encode(model, SecretPayload([1], Codec(1, 1, 1)), 0)
        with pytest.raises(ValidationError):
            lsb_decode(model, Codec(1, 1, 1), 21)

    def test_encoding_barely_moves_accuracy(self):
        ds = gen_blobs(3, 6, 40, 0, 40.0)
        tr, va = split(ds, 0.5, 0)
        spec = ModelSpec.mlp(6, 3, 5, domain=DOMAIN)
        model = train(init_model(spec, 0), tr, TrainConfig(20, 16, 0.1, 0))
        n = lsb_capacity(model, 16)
        enc = lsb_encode(model, SecretPayload(np.random.default_rng(1).integers(0, 2, n), Codec(1, n, 1)), 16)
        assert abs(accuracy(enc, va) - accuracy(model, va)) < 0.001


class TestSign:
    def test_zero_reads_as_one(self):
        spec = ModelSpec.softmax(1, 2)
        m = Model(spec, np.array([0.0, -0.0, -1e-300, 3.0]))
        assert sign_decode(m, 4).tolist() == [1, 1, 0, 1]
        with pytest.raises(ValidationError):
            sign_decode(m, 5)

    def test_hinge_training_writes_signs(self):
        ds = gen_blobs(2, 8, 30, 0, 30.0)
        spec = ModelSpec.mlp(8, 2, 6, domain=DOMAIN)
        bits = np.random.default_rng(3).integers(0, 2, 40)
        m = sign_encode_train(spec, ds, bits, 10.0, TrainConfig(30, 16, 0.1, 0))
        assert np.mean(sign_decode(m, 40) == bits) >= 0.95

    def test_payload_longer_than_model_rejected(self):
        spec = ModelSpec.softmax(2, 2, domain=DOMAIN)
        with pytest.raises(ValidationError):
            sign_encode_train(spec, gen_blobs(2, 2, 3, 0, 1.0), np.ones(7), 1.0, TrainConfig(1))


@pytest.fixture(scope="module")
def data():
    return split(gen_blobs(3, 16, 40, 0, 40.0), 0.5, 1)


class TestEndToEnd:
    def test_lsb_recovers_samples_without_defense(self, data):
        tr, va = data
        spec = ModelSpec.mlp(16, 3, 8, domain=DOMAIN)
        rep = memorization_attack_eval(tr, SensitiveSelection([0, 4, 9]), spec, TrainConfig(5, 16, 0.1, 0),
                                       val_set=va, sample_shape=(4, 4))
        assert rep.aux["bit_recovery_rate"] == 1.0
        # only quantization error is left: half a level at most
        assert np.abs(rep.artifacts["recovered"] - rep.artifacts["original"]).max() <= 0.5 + 1e-9
        assert rep.f1 == 1.0
        assert rep.curve is not None and rep.curve.final[0] == 5

    def test_defense_scrambles_noised_coordinates(self, data):
        tr, va = data
        spec = ModelSpec.mlp(16, 3, 8, domain=DOMAIN)
        sel = SensitiveSelection(list(range(0, 60, 3)))
        rep = memorization_attack_eval(tr, sel, spec, TrainConfig(5, 16, 0.1, 0), val_set=va,
                                       defense=IndividualParams(1 / 3, 75.0), seed=4)
        assert rep.aux["bit_recovery_rate"] == 1.0
        assert rep.aux["clean_bit_recovery_rate"] < 1.0
        # the oracle for uniform pixel values is ~49; allow sampling slack on 120 coordinates
        assert rep.aux["recon_mae_noised"] > 30
        assert abs(rep.aux["recon_mae_noised"] - clipped_noise_mae(75.0)) < 15

    def test_zero_sigma_defense_is_a_no_op(self, data):
        tr, va = data
        spec = ModelSpec.softmax(16, 3, domain=DOMAIN)
        sel = SensitiveSelection([1, 2])
        cfg = TrainConfig(3, 16, 0.1, 0)
        a = memorization_attack_eval(tr, sel, spec, cfg, val_set=va)
        b = memorization_attack_eval(tr, sel, spec, cfg, val_set=va, defense=IndividualParams(0.5, 0.0))
        assert a.aux == b.aux
        assert np.array_equal(a.artifacts["recovered"], b.artifacts["recovered"])

    def test_sign_method_and_unknown_method(self, data):
        tr, va = data
        spec = ModelSpec.mlp(16, 3, 8, domain=DOMAIN)
        rep = memorization_attack_eval(tr, SensitiveSelection([0, 1]), spec, TrainConfig(20, 16, 0.1, 0),
                                       method="sign", bits_per_feature=1, sign_weight=10.0, val_set=va)
        assert rep.aux["payload_bits"] == 32
        assert rep.aux["bit_recovery_rate"] >= 0.95
        with pytest.raises(ValidationError):
            memorization_attack_eval(tr, SensitiveSelection([0]), spec, TrainConfig(1), method="dct")

    def test_empty_selection_rejected(self, data):
        tr, _ = data
        with pytest.raises(ValidationError):
            memorization_attack_eval(tr, SensitiveSelection([]), ModelSpec.softmax(16, 3, domain=DOMAIN),
                                     TrainConfig(1))


def test_clipped_noise_oracle_value():
    # frozen Monte-Carlo references: uniform pixel values, and a pixel pinned mid-range
    assert clipped_noise_mae(75.0) == pytest.approx(48.77, abs=0.2)
    assert clipped_noise_mae(75.0, at=127.5) == pytest.approx(57.03, abs=0.2)
