import pytest
from fastapi.testclient import TestClient

from pseudocpp.metrics import combine_codebleu
from pseudocpp.pipeline import generate_code
from pseudocpp.service import create_app
from pseudocpp.tokenizer import decode, encode, postprocess_code


@pytest.fixture()
def bare_client():
    return TestClient(create_app())


@pytest.fixture(scope="module")
def loaded_client(single_pair_checkpoint):
    return TestClient(create_app(checkpoint_path=single_pair_checkpoint))


def test_health_without_model(bare_client):
    payload = bare_client.get("/api/health").json()
    assert payload == {"status": "ok", "model_loaded": False, "checkpoint_id": None}


def test_health_with_model(loaded_client):
    payload = loaded_client.get("/api/health").json()
    assert payload["status"] == "ok"
    assert payload["model_loaded"] is True
    assert payload["checkpoint_id"] == "single-pair-overfit"


def test_generate_before_load_is_503(bare_client):
    response = bare_client.post("/api/generate", json={"pseudocode": "read n"})
    assert response.status_code == 503


def test_generate_empty_input_is_422(loaded_client):
    assert loaded_client.post("/api/generate", json={"pseudocode": "  "}).status_code == 422
    assert loaded_client.post("/api/generate", json={}).status_code == 422


def test_generate_overlong_input_is_413(loaded_client):
    words = " ".join(["word"] * 400)  # fixture model allows 128 positions
    response = loaded_client.post("/api/generate", json={"pseudocode": words})
    assert response.status_code == 413


def test_generate_reproduces_overfit_pair(loaded_client, single_pair_setup):
    setup = single_pair_setup
    pair = setup["pair"]
    response = loaded_client.post("/api/generate", json={"pseudocode": pair.pseudocode})
    assert response.status_code == 200
    payload = response.json()
    expected = postprocess_code(
        decode(setup["tgt_vocab"], encode(setup["tgt_vocab"], pair.code))
    )
    assert payload["code"] == expected
    assert payload["tokens"] > 0 and payload["latency_ms"] >= 0


def test_generate_is_deterministic(loaded_client, single_pair_setup):
    body = {"pseudocode": single_pair_setup["pair"].pseudocode}
    first = loaded_client.post("/api/generate", json=body).json()["code"]
    second = loaded_client.post("/api/generate", json=body).json()["code"]
    assert first == second


def test_generate_matches_direct_pipeline(loaded_client, single_pair_setup):
    setup = single_pair_setup
    via_http = loaded_client.post(
        "/api/generate", json={"pseudocode": setup["pair"].pseudocode}
    ).json()["code"]
    direct = generate_code(
        setup["params"],
        setup["config"],
        setup["src_vocab"],
        setup["tgt_vocab"],
        setup["pair"].pseudocode,
        max_len=127,
    )
    assert via_http == direct


def test_evaluate_identical_pair(bare_client):
    code = "int main (){\nint a = 1;\ncin >> a;\ncout << a << endl;\n}"
    payload = bare_client.post(
        "/api/evaluate", json={"candidate": code, "reference": code}
    ).json()
    for key in ("similarity", "bleu", "ngram", "weighted_ngram", "syntax", "dataflow", "codebleu"):
        assert payload[key] == 1.0


def test_evaluate_missing_field_is_422(bare_client):
    assert bare_client.post("/api/evaluate", json={"candidate": "x"}).status_code == 422


def test_evaluate_reports_null_dataflow(bare_client):
    payload = bare_client.post(
        "/api/evaluate",
        json={"candidate": "int main (){ return 0; }", "reference": "int main (){ return 0; }"},
    ).json()
    assert payload["dataflow"] is None
    assert payload["codebleu"] == 1.0


def test_combiner_reproduces_published_row():
    # the same combiner the evaluate endpoint relies on
    assert combine_codebleu(0.865, 0.849, 0.8519, 0.8981) == pytest.approx(0.8659, abs=1e-3)
