import csv

from click.testing import CliRunner

from tracelink.cli import main

from helpers import write_coest

PLANTED = {
    "sources": {
        "s1": "system shall enqueue uniqalpha packets",
        "s2": "service must render uniqbeta charts",
        "s3": "module stores uniqgamma records",
    },
    "targets": {
        "t1": "the uniqalpha packet handler",
        "t2": "chart renderer for uniqbeta data",
        "t3": "uniqgamma record persistence layer",
        "t4": "unrelated background job",
    },
    "answers": [("s1", "t1"), ("s2", "t2"), ("s3", "t3")],
}


def make_fixture(tmp_path):
    root = tmp_path / "data"
    root.mkdir()
    write_coest(root, PLANTED["sources"], PLANTED["targets"], PLANTED["answers"])
    return root


def run(args):
    return CliRunner().invoke(main, args, catch_exceptions=False)


def read_bytes_map(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir()) if p.is_file()}


def test_recover_top_k_row_cap(tmp_path):
    root = make_fixture(tmp_path)
    out = tmp_path / "out"
    result = run(["recover", "--dataset", str(root), "--engine", "vsm",
                  "--measure", "cosine", "--top-k", "2", "--out", str(out)])
    assert result.exit_code == 0, result.output
    with (out / "candidates.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    per_source = {}
    for row in rows:
        per_source.setdefault(row["source_id"], []).append(row)
    assert all(len(v) <= 2 for v in per_source.values())
    assert (out / "run_config.txt").is_file()


def test_eval_identical_is_perfect(tmp_path):
    root = make_fixture(tmp_path)
    pred = tmp_path / "pred.csv"
    with pred.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source_id", "target_id", "score", "engine"])
        for s, t in PLANTED["answers"]:
            writer.writerow([s, t, "1.0", "vsm"])
    out = tmp_path / "eval"
    result = run(["eval", "--pred", str(pred), "--gold", str(root / "answers.txt"),
                  "--out", str(out)])
    assert result.exit_code == 0, result.output
    report = dict(
        line.split("=") for line in (out / "report.txt").read_text().splitlines()
    )
    assert float(report["precision"]) == 1.0
    assert float(report["recall"]) == 1.0
    assert float(report["f1"]) == 1.0


def test_recover_then_eval_pipeline(tmp_path):
    root = make_fixture(tmp_path)
    out = tmp_path / "rec"
    run(["recover", "--dataset", str(root), "--top-k", "1", "--out", str(out)])
    eval_out = tmp_path / "ev"
    result = run(["eval", "--pred", str(out / "candidates.csv"),
                  "--gold", str(root / "answers.txt"), "--out", str(eval_out)])
    assert result.exit_code == 0
    report = dict(
        line.split("=") for line in (eval_out / "report.txt").read_text().splitlines()
    )
    assert float(report["recall"]) == 1.0  # planted tokens make top-1 exact


def test_maintain_deletion_fixture(tmp_path):
    v1 = tmp_path / "v1"
    v1.mkdir()
    write_coest(v1, PLANTED["sources"], PLANTED["targets"], PLANTED["answers"])
    v2 = tmp_path / "v2"
    v2.mkdir()
    targets_v2 = {k: v for k, v in PLANTED["targets"].items() if k != "t1"}
    write_coest(v2, PLANTED["sources"], targets_v2, [])

    matrix = tmp_path / "m.csv"
    with matrix.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "source_id", "target_id", "type_label", "score", "provenance", "protected"])
        writer.writerow(["a1", "s1", "t1", "", "0.9", "automatic", "false"])
        writer.writerow(["a2", "s2", "t2", "", "0.8", "automatic", "false"])

    out = tmp_path / "maint"
    result = run(["maintain", "--old", str(v1), "--new", str(v2), "--matrix", str(matrix),
                  "--threshold", "0.3", "--out", str(out)])
    assert result.exit_code == 0, result.output
    log = (out / "justifications.log").read_text()
    assert "artifact_removed" in log
    with (out / "updated_matrix.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert ("s1", "t1") not in {(r["source_id"], r["target_id"]) for r in rows}


def test_cli_determinism_byte_identical(tmp_path):
    root = make_fixture(tmp_path)
    outputs = []
    for run_dir in ("r1", "r2"):
        out = tmp_path / run_dir
        result = run(["recover", "--dataset", str(root), "--engine", "lda",
                      "--lda-iterations", "40", "--top-k", "2", "--seed", "11",
                      "--out", str(out)])
        assert result.exit_code == 0, result.output
        files = read_bytes_map(out)
        del files["run_config.txt"]  # embeds the out dir path itself
        outputs.append(files)
    assert outputs[0] == outputs[1]


def test_cli_config_file_with_flag_override(tmp_path):
    root = make_fixture(tmp_path)
    config = tmp_path / "run.cfg"
    config.write_text(f"dataset={root}\ntop_k=1\nengine=vsm\n")
    out = tmp_path / "cfg_out"
    result = run(["recover", "--config", str(config), "--dataset", str(root),
                  "--top-k", "2", "--out", str(out)])
    assert result.exit_code == 0, result.output
    resolved = (out / "run_config.txt").read_text()
    assert "top_k=2" in resolved  # flag beats file
    assert "engine=vsm" in resolved  # file fills the gap


def test_bad_flags_exit_2(tmp_path):
    result = CliRunner().invoke(main, ["recover", "--engine", "quantum"])
    assert result.exit_code == 2


def test_data_error_exit_1(tmp_path):
    empty = tmp_path / "nothing"
    empty.mkdir()
    out = tmp_path / "out"
    result = CliRunner().invoke(
        main,
        ["recover", "--dataset", str(empty), "--top-k", "1", "--out", str(out)],
    )
    assert result.exit_code == 1
    assert "error" in result.output


def test_classify_types_command(tmp_path):
    issues = tmp_path / "issues.csv"
    links = tmp_path / "links.csv"
    pools = {
        "blocks": ["deadlock", "mutex", "waiting", "stall"],
        "duplicates": ["same", "identical", "copy", "mirror"],
    }
    import random as _random

    rng = _random.Random(0)
    with issues.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "title", "description", "issue_type", "reporter", "assignee", "created_at"])
        counter = 0
        link_rows = []
        for label, pool in pools.items():
            for _ in range(8):
                a, b = f"I{counter}", f"I{counter+1}"
                counter += 2
                for iid in (a, b):
                    writer.writerow(
                        [iid, " ".join(rng.choice(pool) for _ in range(3)),
                         " ".join(rng.choice(pool) for _ in range(6)),
                         "bug", "alice", "bo", float(counter)]
                    )
                link_rows.append([a, b, label.upper()])
    with links.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source_id", "target_id", "raw_label"])
        writer.writerows(link_rows)

    out = tmp_path / "types"
    result = run(["classify-types", "--issues", str(issues), "--links", str(links),
                  "--split", "kfold", "--k", "2", "--epochs", "150", "--out", str(out)])
    assert result.exit_code == 0, result.output
    report = dict(
        line.split("=") for line in (out / "type_report.txt").read_text().splitlines()
    )
    assert float(report["macro_f1"]) >= 0.9
    assert (out / "per_class.csv").is_file()


def test_explain_command(tmp_path):
    root = make_fixture(tmp_path)
    glossary = tmp_path / "glossary.csv"
    glossary.write_text(
        "term,expansion,definition,source\n"
        "uniqalpha,Unique Alpha Packet,wire format for alpha packets,project_glossary\n"
    )
    triplets = tmp_path / "triplets.csv"
    triplets.write_text(
        "subject,verb,object\n"
        "uniqalpha,is a,packet format\n"
        "packet format,is a,data format\n"
    )
    out = tmp_path / "exp"
    result = run(["explain", "--dataset", str(root), "--source", "s1", "--target", "t1",
                  "--glossary", str(glossary), "--triplets", str(triplets),
                  "--concept-a", "uniqalpha", "--concept-b", "data format",
                  "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert "(1)" in (out / "prompt.txt").read_text()
    annotations = (out / "annotations.csv").read_text()
    assert "uniqalpha" in annotations
    path_text = (out / "path.txt").read_text()
    assert path_text.count("is_a") == 2


def test_explain_unknown_pair_exit_1(tmp_path):
    root = make_fixture(tmp_path)
    out = tmp_path / "exp"
    result = CliRunner().invoke(
        main,
        ["explain", "--dataset", str(root), "--source", "sX", "--target", "t1",
         "--out", str(out)],
    )
    assert result.exit_code == 1
