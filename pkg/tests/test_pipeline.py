import subprocess
import sys

import numpy as np
import pytest

from specter import pipeline, robustness, tensorstore
from specter.cdma import EmbedParams, predicted_snr_db
from specter.errors import CapacityError, IntegrityError, SignalNotFound
from specter.tensorstore import F16, F32, Tensor, TensorStore


def test_round_trip(small_stego, payload, params):
    res = pipeline.extract_values(small_stego, len(payload), params)
    assert res.payload == payload and res.verified
    assert res.blocks_converged == res.n_blocks == 9


def test_record_and_untouched_tail(small_host, payload, params):
    out, rec = pipeline.embed_values(small_host, payload, params)
    assert rec.weights_touched == 112_200 and rec.blocks_used == 187
    assert rec.codeword_bits == 9 * 2048
    assert out[112_200:].tobytes() == small_host[112_200:].tobytes()
    delta = out[:112_200] - small_host[:112_200]
    assert np.mean(delta**2) == pytest.approx(100 * 2e-3**2, rel=0.05)
    assert rec.snr_db_predicted == pytest.approx(4.79, abs=0.1)
    assert rec.post["std"] > rec.pre["std"]


def test_embedding_is_deterministic(small_host, payload, params):
    a, _ = pipeline.embed_values(small_host, payload, params)
    b, _ = pipeline.embed_values(small_host, payload, params)
    assert a.tobytes() == b.tobytes()


def test_capacity_error(payload, params):
    with pytest.raises(CapacityError):
        pipeline.embed_values(np.zeros(100_000), payload, params)


def test_wrong_seed(small_stego, payload):
    outcomes = {"missing": 0, "integrity": 0}
    for seed in range(1000, 1100):
        try:
            pipeline.extract_values(small_stego, len(payload), EmbedParams(seed=seed))
        except SignalNotFound:
            outcomes["missing"] += 1
        except IntegrityError:
            outcomes["integrity"] += 1
    assert outcomes["missing"] >= 95
    assert sum(outcomes.values()) == 100


@pytest.mark.parametrize("delta", [-1, 1])
def test_wrong_length(small_stego, payload, params, delta):
    with pytest.raises(IntegrityError):
        pipeline.extract_values(small_stego, len(payload) + delta, params)


def test_force_returns_unverified(small_stego, payload, params):
    res = pipeline.extract_values(small_stego, len(payload) + 1, params, force=True)
    assert not res.verified and len(res.payload) == len(payload) + 1
    assert res.payload[:-1] == payload


def test_clean_host_probe_not_found(small_host, params):
    with pytest.raises(SignalNotFound):
        pipeline.probe_values(small_host, params)


def test_probe_matches_analytic(small_stego, params):
    est = pipeline.probe_values(small_stego, params)
    assert est.snr_db == pytest.approx(predicted_snr_db(0.02, 2e-3, 600, 100), abs=1.0)


def test_noise_drop(small_stego, payload, params):
    before = pipeline.probe_values(small_stego, params).snr_db
    noisy = robustness.add_noise(small_stego, 0.02, seed=3)
    after = pipeline.probe_values(noisy, params).snr_db
    expected = predicted_snr_db(0.02, 2e-3, 600, 100) - predicted_snr_db(0.02 * np.sqrt(2), 2e-3, 600, 100)
    assert expected == pytest.approx(1.77, abs=0.01)
    assert before - after == pytest.approx(expected, abs=0.5)
    assert pipeline.extract_values(noisy, len(payload), params).payload == payload


def test_half_prune_survives(small_stego, payload, params):
    out = robustness.prune_magnitude(small_stego, 0.5)
    assert pipeline.extract_values(out, len(payload), params).payload == payload


def test_store_level_filter(payload, params):
    host = pipeline.synthetic_values(200_000, 0.02, 8)
    # the 112,200 touched weights span a.weight and the start of b.weight
    store = TensorStore([
        Tensor("a.weight", F32, (100_000,), host[:100_000]),
        Tensor("bias", F32, (10,), np.ones(10)),
        Tensor("b.weight", F32, (100_000,), host[100_000:]),
        Tensor("c.weight", F16, (5,), np.zeros(5)),
    ])
    out, rec = pipeline.embed(store, payload, params, include="*.weight")
    assert out["bias"].data.tobytes() == store["bias"].data.tobytes()
    assert out["b.weight"].data[12_200:].tobytes() == store["b.weight"].data[12_200:].tobytes()
    assert out["c.weight"].data.tobytes() == store["c.weight"].data.tobytes()
    assert pipeline.extract(out, len(payload), params, include="*.weight") == payload
    assert pipeline.probe(out, params, include="*.weight")["snr_db"] > 3


def test_fresh_process_extraction(tmp_path, small_stego, payload, params):
    store = TensorStore([Tensor("w", F32, (small_stego.size,), small_stego)])
    tensorstore.save(store, tmp_path / "s.tsg")
    code = (
        "import sys; from specter import pipeline, tensorstore; from specter.cdma import EmbedParams;"
        "s = tensorstore.load(sys.argv[1]);"
        "sys.stdout.buffer.write(pipeline.extract(s, 1024, EmbedParams(seed=42)))"
    )
    out = subprocess.run([sys.executable, "-c", code, str(tmp_path / "s.tsg")],
                         capture_output=True, check=True)
    assert out.stdout == payload
