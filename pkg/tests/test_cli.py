import json

import pytest

from coitk.cli import main
from coitk.corpus import CONVERSION_MARKER, ingest, write_corpus
from coitk.synthgen import default_spec, generate_corpus, spec_to_dict
from coitk.transitions import K

from helpers import IL, build_corpus, build_dialogue, corpus_file


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out.strip().splitlines()
    payload = json.loads(out[-1]) if out else {}
    return code, payload


@pytest.fixture
def labeled_corpus_path(tmp_path):
    # self-pairable: real source but scenario ids present
    dialogues = [
        build_dialogue(
            "d-001",
            [IL.INFORMATION_INQUIRY, IL.POSITIVE_INTENT, IL.CONVERSION],
            candidate_texts=["Where is the workplace?", "Sounds good, let's talk.",
                             CONVERSION_MARKER],
            tags={2: (CONVERSION_MARKER,)},
            scenario_id="scn-001",
        ),
        build_dialogue(
            "d-002",
            [IL.JOB_CONCERNS, IL.REJECTION],
            candidate_texts=["Is this legit?", "Not interested, thanks."],
            scenario_id="scn-002",
        ),
        build_dialogue(
            "d-003",
            [IL.INFORMATION_INQUIRY, IL.SELF_CONCERNS],
            candidate_texts=["How much is the pay?", "I have no experience."],
            scenario_id="scn-003",
        ),
    ]
    return corpus_file(tmp_path, dialogues, name="labeled.jsonl")


# --- validate ---

def test_validate_ok(capsys, labeled_corpus_path):
    code, payload = run(capsys, "validate", str(labeled_corpus_path))
    assert code == 0
    assert payload["dialogues"] == 3
    assert payload["label_complete"] is True


def test_validate_schema_error_names_line(capsys, tmp_path):
    path = tmp_path / "bad.jsonl"
    good = json.dumps(
        {
            "id": "d-001", "scenario_id": None, "source": "real", "profile": {},
            "turns": [{"index": 0, "speaker": "candidate", "text": "x", "intent": "Rejection"}],
        }
    )
    path.write_text(good + "\n" + "{not json}\n", encoding="utf-8")
    code, payload = run(capsys, "validate", str(path))
    assert code == 2
    assert payload["status"] == "error"
    assert payload["problems"][0]["line"] == 2


def test_validate_missing_file(capsys, tmp_path):
    code, payload = run(capsys, "validate", str(tmp_path / "nope.jsonl"))
    assert code == 1
    assert payload["error"] == "IOFailure"


# --- label ---

def test_label_fills_missing_with_stub_table(capsys, tmp_path):
    obj = {
        "id": "d-001", "scenario_id": None, "source": "real", "profile": {},
        "turns": [
            {"index": 0, "speaker": "recruiter", "text": "hello"},
            {"index": 1, "speaker": "candidate", "text": "Where is the workplace?"},
            {"index": 2, "speaker": "recruiter", "text": "remote"},
            {"index": 3, "speaker": "candidate", "text": "I'm not suitable, thanks."},
        ],
    }
    path = tmp_path / "unlabeled.jsonl"
    path.write_text(json.dumps(obj) + "\n", encoding="utf-8")
    out = tmp_path / "labeled.jsonl"
    code, payload = run(capsys, "label", str(path), "--out", str(out), "--stub")
    assert code == 0
    assert payload["labeled_turns"] == 2
    corpus = ingest(out)
    labels = [t.intent for t in corpus.dialogues[0].candidate_turns()]
    assert labels == [IL.INFORMATION_INQUIRY, IL.REJECTION]


def test_label_noop_is_byte_identical(capsys, labeled_corpus_path, tmp_path):
    out = tmp_path / "copy.jsonl"
    code, _ = run(capsys, "label", str(labeled_corpus_path), "--out", str(out), "--stub")
    assert code == 0
    assert out.read_bytes() == labeled_corpus_path.read_bytes()


def test_label_remote_failure_leaves_no_output(capsys, tmp_path):
    obj = {
        "id": "d-001", "scenario_id": None, "source": "real", "profile": {},
        "turns": [{"index": 0, "speaker": "candidate", "text": "hello there"}],
    }
    path = tmp_path / "unlabeled.jsonl"
    path.write_text(json.dumps(obj) + "\n", encoding="utf-8")
    out = tmp_path / "never.jsonl"
    code, payload = run(
        capsys, "label", str(path), "--out", str(out),
        "--classifier-url", "http://127.0.0.1:9/",  # nothing listens on port 9
        "--timeout-ms", "100", "--max-retries", "0",
    )
    assert code == 3
    assert payload["error"] == "RemoteUnavailable"
    assert not out.exists()


# --- eval ---

def test_eval_self_comparison(capsys, labeled_corpus_path, tmp_path):
    out = tmp_path / "eval"
    code, payload = run(
        capsys, "eval", "--real", str(labeled_corpus_path), "--syn", str(labeled_corpus_path),
        "--out", str(out), "--stub",
    )
    assert code == 0
    assert payload["kl_div"] == 0.0
    assert payload["js_div"] == 0.0
    assert payload["result_f1"] == 1.0
    assert payload["route_cons"] == 1.0
    assert payload["style_sim"] == 1.0
    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    for key in ("kl_div", "js_div", "q_diversity", "style_sim", "result_f1", "route_cons"):
        assert key in report
    assert report["config"]["resolved"]["stub"] is True
    instances = [
        json.loads(line)
        for line in (out / "instances.jsonl").read_text(encoding="utf-8").splitlines()
    ]
    assert [i["dialogue_id"] for i in instances] == ["d-001", "d-002", "d-003"]
    rewards = (out / "rewards.jsonl").read_text(encoding="utf-8").splitlines()
    assert len(rewards) == 3


def test_eval_unlabeled_is_precondition_error(capsys, tmp_path, labeled_corpus_path):
    obj = {
        "id": "d-001", "scenario_id": None, "source": "real", "profile": {},
        "turns": [{"index": 0, "speaker": "candidate", "text": "hi"}],
    }
    path = tmp_path / "unlabeled.jsonl"
    path.write_text(json.dumps(obj) + "\n", encoding="utf-8")
    code, payload = run(
        capsys, "eval", "--real", str(labeled_corpus_path), "--syn", str(path),
        "--out", str(tmp_path / "e"), "--stub",
    )
    assert code == 4
    assert payload["error"] == "UnlabeledCorpus"


def test_eval_unpaired_scenarios_fail(capsys, tmp_path, labeled_corpus_path):
    syn = build_corpus(
        [build_dialogue("s-001", [IL.REJECTION], source="synthetic", scenario_id="scn-missing")]
    )
    syn_path = tmp_path / "syn.jsonl"
    write_corpus(syn, syn_path)
    code, payload = run(
        capsys, "eval", "--real", str(labeled_corpus_path), "--syn", str(syn_path),
        "--out", str(tmp_path / "e"), "--stub",
    )
    assert code == 4
    assert payload["error"] == "UnpairedScenario"
    assert payload["ids"] == ["s-001"]


def test_eval_flatten_flag_changes_values(capsys, tmp_path):
    # matching scenario ids across the two generated corpora keep pairing valid
    syn_path = tmp_path / "syn.jsonl"
    write_corpus(generate_corpus(default_spec(seed=31), 15), syn_path)
    real_path = tmp_path / "real.jsonl"
    write_corpus(generate_corpus(default_spec(seed=32), 15, source="real", id_prefix="r"),
                 real_path)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    code_a, pay_a = run(capsys, "eval", "--real", str(real_path), "--syn", str(syn_path),
                        "--out", str(out_a), "--stub")
    code_b, pay_b = run(capsys, "eval", "--real", str(real_path), "--syn", str(syn_path),
                        "--out", str(out_b), "--stub", "--flatten", "incoming")
    assert code_a == code_b == 0
    assert pay_a["kl_div"] > 0.0 and pay_b["kl_div"] > 0.0
    assert pay_a["kl_div"] != pay_b["kl_div"]  # the two flattenings report different scales
    # self-eval stays exactly zero in both modes
    out_c, out_d = tmp_path / "c", tmp_path / "d"
    _, self_joint = run(capsys, "eval", "--real", str(syn_path), "--syn", str(syn_path),
                        "--out", str(out_c), "--stub")
    _, self_inc = run(capsys, "eval", "--real", str(syn_path), "--syn", str(syn_path),
                      "--out", str(out_d), "--stub", "--flatten", "incoming")
    assert self_joint["kl_div"] == self_inc["kl_div"] == 0.0


# --- select ---

def test_select_exhaustive_matches_oracle_minimum(capsys, tmp_path):
    pool = generate_corpus(default_spec(seed=55), 8)
    reference = generate_corpus(default_spec(seed=56), 60, source="real", id_prefix="real")
    pool_path, ref_path = tmp_path / "pool.jsonl", tmp_path / "ref.jsonl"
    write_corpus(pool, pool_path)
    write_corpus(reference, ref_path)
    out = tmp_path / "sel"
    code, payload = run(
        capsys, "select", "--pool", str(pool_path), "--reference", str(ref_path),
        "--out", str(out), "--k", "3", "--strategy", "exhaustive", "--seed", "1",
        "--stub", "--stage1-k", "8",
    )
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    import itertools

    from helpers import oracle_gap

    best = min(
        oracle_gap(list(combo), list(reference.dialogues), 0.5, "js")
        for combo in itertools.combinations(pool.dialogues, 3)
    )
    assert manifest["achieved_gap"] == pytest.approx(best, abs=1e-12)
    selected = ingest(out / "selected.jsonl")
    assert sorted(d.id for d in selected.dialogues) == sorted(manifest["selected_ids"])


def test_select_rerun_is_byte_identical(capsys, tmp_path):
    pool_path = tmp_path / "pool.jsonl"
    ref_path = tmp_path / "ref.jsonl"
    write_corpus(generate_corpus(default_spec(seed=60), 10), pool_path)
    write_corpus(generate_corpus(default_spec(seed=61), 40, source="real", id_prefix="real"),
                 ref_path)
    outputs = []
    for sub in ("s1", "s2"):
        out = tmp_path / sub
        code, _ = run(
            capsys, "select", "--pool", str(pool_path), "--reference", str(ref_path),
            "--out", str(out), "--k", "4", "--strategy", "monte_carlo",
            "--mc-iters", "300", "--seed", "9", "--stub",
        )
        assert code == 0
        outputs.append(
            ((out / "manifest.json").read_bytes(), (out / "selected.jsonl").read_bytes())
        )
    assert outputs[0] == outputs[1]


def test_select_k_too_large(capsys, tmp_path):
    pool_path = tmp_path / "pool.jsonl"
    write_corpus(generate_corpus(default_spec(seed=60), 5), pool_path)
    code, payload = run(
        capsys, "select", "--pool", str(pool_path), "--reference", str(pool_path),
        "--out", str(tmp_path / "sel"), "--k", "6", "--seed", "1", "--stub",
    )
    assert code == 5
    assert payload["error"] == "KTooLarge"


def test_select_requires_k(capsys, tmp_path):
    pool_path = tmp_path / "pool.jsonl"
    write_corpus(generate_corpus(default_spec(seed=60), 5), pool_path)
    code, payload = run(
        capsys, "select", "--pool", str(pool_path), "--reference", str(pool_path),
        "--out", str(tmp_path / "sel"), "--seed", "1", "--stub",
    )
    assert code == 2


# --- synth ---

def test_synth_deterministic_golden(capsys, tmp_path):
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(spec_to_dict(default_spec(seed=77))), encoding="utf-8")
    out1, out2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    code1, _ = run(capsys, "synth", "--spec", str(spec_path), "--n", "10", "--out", str(out1))
    code2, _ = run(capsys, "synth", "--spec", str(spec_path), "--n", "10", "--out", str(out2))
    assert code1 == code2 == 0
    assert out1.read_bytes() == out2.read_bytes()
    # golden: byte-equal to the library path
    golden = tmp_path / "golden.jsonl"
    write_corpus(generate_corpus(default_spec(seed=77), 10), golden)
    assert out1.read_bytes() == golden.read_bytes()


def test_synth_invalid_spec_exit_2(capsys, tmp_path):
    spec_path = tmp_path / "spec.json"
    obj = spec_to_dict(default_spec())
    obj["forward_matrix"]["Information Inquiry"]["Positive Intent"] += 0.01
    spec_path.write_text(json.dumps(obj), encoding="utf-8")
    code, payload = run(capsys, "synth", "--spec", str(spec_path), "--n", "5",
                        "--out", str(tmp_path / "x.jsonl"))
    assert code == 2
    assert payload["error"] == "SchemaViolation"


def test_synth_n_zero_exit_2(capsys, tmp_path):
    code, _ = run(capsys, "synth", "--spec", "default", "--n", "0",
                  "--out", str(tmp_path / "x.jsonl"))
    assert code == 2


def test_synth_seed_flag_overrides_spec(capsys, tmp_path):
    out_a, out_b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    run(capsys, "synth", "--spec", "default", "--n", "5", "--out", str(out_a), "--seed", "123")
    golden = tmp_path / "golden.jsonl"
    write_corpus(generate_corpus(default_spec(seed=123), 5), golden)
    assert out_a.read_bytes() == golden.read_bytes()


# --- coi export ---

def test_coi_export(capsys, tmp_path, labeled_corpus_path):
    out = tmp_path / "coi"
    code, payload = run(capsys, "coi", "--input", str(labeled_corpus_path), "--out", str(out))
    assert code == 0
    matrix = json.loads((out / "matrix.json").read_text(encoding="utf-8"))
    assert len(matrix["labels"]) == K
    csv_lines = (out / "matrix.csv").read_text(encoding="utf-8").strip().splitlines()
    assert len(csv_lines) == K + 1
    counts = json.loads((out / "counts.json").read_text(encoding="utf-8"))
    assert counts["total_transitions"] == payload["total_transitions"]
    for j, colsum in enumerate(
        [sum(row[j] for row in matrix["values"]) for j in range(K)]
    ):
        if j in matrix["zero_columns"]:
            assert colsum == 0.0
        else:
            assert abs(colsum - 1.0) <= 1e-9


# --- config precedence ---

def test_flags_override_file_override_env(capsys, tmp_path, labeled_corpus_path, monkeypatch):
    monkeypatch.setenv("COI_JUDGE_URL", "http://env-judge.invalid/")
    config = tmp_path / "conf.json"
    config.write_text(json.dumps({"alpha": 0.3, "judge_url": "http://file-judge.invalid/"}),
                      encoding="utf-8")
    out = tmp_path / "eval"
    code, _ = run(
        capsys, "eval", "--real", str(labeled_corpus_path), "--syn", str(labeled_corpus_path),
        "--out", str(out), "--config", str(config), "--alpha", "0.7", "--stub",
    )
    assert code == 0
    echo = json.loads((out / "report.json").read_text(encoding="utf-8"))["config"]
    assert echo["env"]["judge_url"] == "http://env-judge.invalid/"
    assert echo["config_file"]["alpha"] == 0.3
    assert echo["flags"]["alpha"] == 0.7
    assert echo["resolved"]["alpha"] == 0.7
    assert echo["resolved"]["judge_url"] == "http://file-judge.invalid/"


def test_unknown_config_key_rejected(capsys, tmp_path, labeled_corpus_path):
    config = tmp_path / "conf.json"
    config.write_text(json.dumps({"alfa": 0.3}), encoding="utf-8")
    code, payload = run(
        capsys, "eval", "--real", str(labeled_corpus_path), "--syn", str(labeled_corpus_path),
        "--out", str(tmp_path / "e"), "--config", str(config), "--stub",
    )
    assert code == 2
    assert "alfa" in payload["message"]
