import json

from findmy_verif.cli import main

FAST = ["--bounds", "max_epochs=2", "--bounds", "max_reports=1"]


def test_verify_single_lemma_exit_zero(tmp_path, capsys):
    rc = main(["verify", "--lemma", "sanity_check", "--out", str(tmp_path / "r.json"), "--no-timing"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "sanity_check: holds_at_bound" in out
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep["all_as_expected"] is True
    assert rep["verdicts"][0]["lemma"] == "sanity_check"


def test_verify_writes_bundle(tmp_path):
    rc = main(
        ["verify", "--lemma", "sanity_check", "--lemma", "d0_sec", *FAST, "--out", str(tmp_path / "rep")]
    )
    assert rc == 0
    assert (tmp_path / "rep" / "verdicts.json").exists()
    assert (tmp_path / "rep" / "verdicts.csv").exists()
    assert (tmp_path / "rep" / "verdicts.png").exists()
    csv_text = (tmp_path / "rep" / "verdicts.csv").read_text()
    assert csv_text.splitlines()[0].startswith("lemma,verdict")


def test_verify_report_deterministic(tmp_path):
    args = ["verify", "--lemma", "d0_sec", "--lemma", "epochs_start1", *FAST, "--no-timing"]
    main([*args, "--out", str(tmp_path / "a.json")])
    main([*args, "--out", str(tmp_path / "b.json")])
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_verify_regression_exit_one(tmp_path):
    # selecting the weakened control but expecting it to hold
    config = {
        "lemmas": ["d0_sec_weakened"],
        "bounds": {"max_epochs": 2, "max_reports": 0},
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(config))
    # as shipped the control expects failure, so the run is clean
    assert main(["verify", "--config", str(cfg_path)]) == 0


def test_verify_expected_failure_detected_as_regression(tmp_path, capsys):
    # flip the expectation on the weakened control: now its counterexample is
    # a regression and the exit code must say so
    config = {
        "lemmas": ["d0_sec_weakened"],
        "expect_overrides": {"d0_sec_weakened": "holds"},
        "bounds": {"max_epochs": 2, "max_reports": 0},
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(config))
    rc = main(["verify", "--config", str(cfg_path)])
    assert rc == 1
    assert "REGRESSION" in capsys.readouterr().out


def test_verify_concrete_backend_rejects_knowledge_lemmas(capsys):
    rc = main(["verify", "--backend", "concrete", "--lemma", "d0_sec", *FAST])
    assert rc == 2
    assert "symbolic" in capsys.readouterr().err


def test_verify_concrete_backend_runs_event_lemmas(tmp_path):
    config = {
        "backend": "concrete",
        "lemmas": ["epochs_start1", "epochs_start2"],
        "reveals": [],
        "bounds": {"max_epochs": 2, "max_reports": 1},
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(config))
    assert main(["verify", "--config", str(cfg_path)]) == 0


def test_unknown_lemma_is_usage_error(capsys):
    rc = main(["verify", "--lemma", "no_such_lemma"])
    assert rc == 2
    assert "unknown lemma" in capsys.readouterr().err


def test_bad_bounds_usage_error(capsys):
    rc = main(["verify", "--bounds", "max_epochs=many"])
    assert rc == 2
    rc = main(["verify", "--bounds", "shoes=2"])
    assert rc == 2


def test_bad_config_file(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    assert main(["verify", "--config", str(path)]) == 2
    path2 = tmp_path / "unknown.json"
    path2.write_text(json.dumps({"mystery_key": 1}))
    assert main(["verify", "--config", str(path2)]) == 2


def test_demo_round_trip_and_determinism(tmp_path, capsys):
    def transcript(seed, name):
        rc = main(["demo", "--seed", seed, "--epochs", "3", "--out", str(tmp_path / name)])
        assert rc == 0
        out = capsys.readouterr().out
        return [line for line in out.splitlines() if not line.startswith("stored to")]

    first = transcript("1", "s1.jsonl")
    assert any("round trip ok" in line for line in first)
    assert transcript("1", "s2.jsonl") == first
    assert transcript("2", "s3.jsonl") != first


def test_demo_store_is_appended_jsonl(tmp_path):
    store = tmp_path / "store.jsonl"
    main(["demo", "--seed", "1", "--epochs", "2", "--out", str(store)])
    main(["demo", "--seed", "3", "--epochs", "2", "--out", str(store)])
    lines = [json.loads(l) for l in store.read_text().splitlines()]
    assert len(lines) == 2
    for rec in lines:
        assert set(rec) == {"report_id", "ciphertext", "ephemeral_pub", "upload_time"}
        bytes.fromhex(rec["report_id"])


def test_dump_traces_counts_match(tmp_path, capsys):
    out = tmp_path / "t.jsonl"
    rc = main(["dump-traces", *FAST, "--out", str(out)])
    assert rc == 0
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    lines = out.read_text().splitlines()
    assert summary["records"] == len(lines)
    headers = [json.loads(l) for l in lines if "length" in json.loads(l)]
    steps = [json.loads(l) for l in lines if "rule" in json.loads(l)]
    assert summary["traces"] == len(headers)
    assert summary["steps"] == len(steps)


def test_dump_traces_empty_bounds(tmp_path, capsys):
    out = tmp_path / "empty.jsonl"
    rc = main(
        [
            "dump-traces",
            "--bounds",
            "max_sessions=0",
            "--bounds",
            "max_epochs=0",
            "--bounds",
            "max_reports=0",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 1
    assert json.loads(lines[0]) == {"trace": 0, "length": 0}


def test_dump_traces_byte_identical(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    main(["dump-traces", *FAST, "--out", str(a)])
    main(["dump-traces", *FAST, "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_dump_traces_rejects_concrete(capsys):
    rc = main(["dump-traces", "--backend", "concrete"])
    assert rc == 2


def test_dump_traces_unwritable_path(tmp_path, capsys):
    target = tmp_path / "is_a_dir"
    target.mkdir()
    rc = main(["dump-traces", *FAST, "--out", str(target)])
    assert rc == 1
    assert "cannot write" in capsys.readouterr().err


def test_jobs_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("FINDMY_VERIF_JOBS", "2")
    rc = main(["verify", "--lemma", "sanity_check", *FAST])
    assert rc == 0
    monkeypatch.setenv("FINDMY_VERIF_JOBS", "soup")
    assert main(["verify", "--lemma", "sanity_check", *FAST]) == 2
