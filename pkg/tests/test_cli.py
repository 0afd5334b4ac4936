import hashlib
import subprocess
import sys

import pytest

from adrsignal.cli import main
from adrsignal.synth import read_truth


def summary(text):
    return dict(line.split("=", 1) for line in text.splitlines() if "=" in line)


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--out", str(out), "--seed", "4", "--n-exposed", "2500", "--n-unexposed", "100"]) == 0
    return out


def test_synth_default_writes_four_files(tmp_path, capsys):
    assert main(["synth", "--out", str(tmp_path / "a")]) == 0
    listed = capsys.readouterr().out.split()
    assert [p.rsplit("/", 1)[1] for p in listed] == ["patients.csv", "therapy.csv", "medical.csv", "truth.csv"]
    assert main(["synth", "--out", str(tmp_path / "b")]) == 0
    for name in ("patients", "therapy", "medical", "truth"):
        assert sha(tmp_path / "a" / f"{name}.csv") == sha(tmp_path / "b" / f"{name}.csv")


def test_detect_recovers_injections(synth_dir, tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["detect", "--input", str(synth_dir), "--drug-codes", "DRUG0001", "--out", str(out)]) == 0
    s = summary(capsys.readouterr().out)
    assert s["cohort_size"] == "2500"
    assert s["group_count"] == "25"
    rows = (out / "signals_p_full.tsv").read_text().splitlines()[1:21]
    top20 = {r.split("\t")[1] for r in rows}
    truth = read_truth(synth_dir / "truth.csv")
    assert len(truth) == 10
    assert len(top20 & set(truth)) >= 9


def test_detect_modes_and_summary(synth_dir, tmp_path, capsys):
    for mode in ("full", "level3"):
        assert main(["detect", "--input", str(synth_dir), "--drug-codes", "DRUG0001",
                     "--mode", mode, "--out", str(tmp_path / mode)]) == 0
        s = summary(capsys.readouterr().out)
        assert int(s["events_level3"]) < int(s["events_full"])
        assert s["config.mode"] == mode
        assert (tmp_path / mode / f"signals_p_{mode}.tsv").exists()
        assert (tmp_path / mode / f"statistics_{mode}.tsv").exists()


def test_detect_is_byte_identical(synth_dir, tmp_path):
    for run in ("a", "b"):
        assert main(["detect", "--input", str(synth_dir), "--drug-codes", "DRUG0001", "--order", "r1",
                     "--out", str(tmp_path / run)]) == 0
    for name in ("signals_r1_full.tsv", "statistics_full.tsv"):
        assert sha(tmp_path / "a" / name) == sha(tmp_path / "b" / name)


def test_config_precedence(synth_dir, tmp_path, capsys):
    cfg = tmp_path / "run.yaml"
    cfg.write_text(
        f"input: {synth_dir}\ndrug_codes: [DRUG0001]\ngroup_size: 50\np_max: 0.01\nout: {tmp_path / 'cfg'}\n"
    )
    assert main(["detect", "--config", str(cfg), "--p-max", "0.02"]) == 0
    s = summary(capsys.readouterr().out)
    assert s["config.group_size"] == "50"
    assert s["group_count"] == "50"
    assert s["config.p_max"] == "0.02"
    assert s["config.window_days"] == "60"


def test_drug_codes_from_file(synth_dir, tmp_path, capsys):
    codes = tmp_path / "codes.txt"
    codes.write_text("DRUG0001\nDRUG9999\n")
    assert main(["detect", "--input", str(synth_dir), "--drug-codes", str(codes), "--out", str(tmp_path / "o")]) == 0
    assert summary(capsys.readouterr().out)["config.drug_codes"] == "DRUG0001,DRUG9999"


def test_report_subcommand(synth_dir, tmp_path, capsys):
    out = tmp_path / "run"
    main(["detect", "--input", str(synth_dir), "--drug-codes", "DRUG0001", "--out", str(out)])
    capsys.readouterr()
    first = (out / "signals_p_full.tsv").read_text()
    dictionary = tmp_path / "dict.csv"
    dictionary.write_text("code,description\nA00..00,Synthetic A\n")
    assert main(["report", str(out / "statistics_full.tsv"), "--out", str(tmp_path / "rep")]) == 0
    assert (tmp_path / "rep" / "signals_p_full.tsv").read_text() == first
    assert main(["report", str(out / "statistics_full.tsv"), "--order", "r1", "--chapter", "A",
                 "--dictionary", str(dictionary), "--format", "csv", "--out", str(tmp_path / "rep")]) == 0
    rows = (tmp_path / "rep" / "signals_r1_full.csv").read_text().splitlines()
    assert rows[0] == "rank,readcode,description,NB,NA,R1,R2,t,p"
    assert all(r.split(",")[1].startswith("A") for r in rows[1:])
    assert "Synthetic A" in "\n".join(rows)


def error_line(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1
    return err[0]


def test_too_few_patients(tmp_path, capsys):
    assert main(["synth", "--out", str(tmp_path / "d"), "--n-exposed", "1"]) == 0
    capsys.readouterr()
    assert main(["detect", "--input", str(tmp_path / "d"), "--drug-codes", "DRUG0001",
                 "--out", str(tmp_path / "o")]) == 1
    assert error_line(capsys).startswith("error: TooFewPatients:")


def test_empty_medical_file(synth_dir, tmp_path, capsys):
    medical = tmp_path / "medical.csv"
    medical.write_text("patient_id,readcode,date\n")
    code = main(["detect", "--patients", str(synth_dir / "patients.csv"), "--therapy", str(synth_dir / "therapy.csv"),
                 "--medical", str(medical), "--drug-codes", "DRUG0001", "--out", str(tmp_path / "o")])
    assert code == 1
    assert error_line(capsys).startswith("error: EmptyCohort:")


@pytest.mark.parametrize(
    "argv, category",
    [
        (["--drug-codes", "NOPE"], "EmptyCohort"),
        ([], "InvalidConfig"),
        (["--drug-codes", "DRUG0001", "--p-max", "2"], "InvalidConfig"),
    ],
)
def test_error_categories(synth_dir, tmp_path, capsys, argv, category):
    assert main(["detect", "--input", str(synth_dir), "--out", str(tmp_path / "o")] + argv) == 1
    assert error_line(capsys).startswith(f"error: {category}:")


def test_malformed_input_category(tmp_path, capsys):
    (tmp_path / "patients.csv").write_text("patient_id\nP1\n")
    (tmp_path / "therapy.csv").write_text("patient_id,drug_code,date\nP1,DRUG0001,2010-13-40\n")
    (tmp_path / "medical.csv").write_text("patient_id,readcode,date\n")
    assert main(["detect", "--input", str(tmp_path), "--drug-codes", "DRUG0001"]) == 1
    line = error_line(capsys)
    assert line.startswith("error: MalformedRow:") and "therapy.csv:2" in line


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "adrsignal", "synth", "--out", str(tmp_path), "--n-exposed", "5",
                           "--n-codes", "12"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "truth.csv").exists()
