import os
import signal
import socket
import subprocess
import sys
import time

import pytest

from conftest import SERVER, cooker_scenario
from smartsocket.cli import main


def kv(text):
    return dict(line.split("=", 1) for line in text.splitlines() if "=" in line and
                not line.startswith("alarm="))


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "svc.conf").write_text(
        f"server_address={SERVER}\nrecipients.*=+37126000001\nfsync=false\n")
    return tmp_path


def test_simulate_cooker_scenario(workdir, capsys):
    (workdir / "cooker.scn").write_text(cooker_scenario())
    assert main(["simulate", "--scenario", "cooker.scn", "--config", "svc.conf"]) == 0
    out = capsys.readouterr().out
    assert kv(out)["events"] == "3" and kv(out)["alarms"] == "1"
    assert "alarm=S001/2015-02-13/10 raised_at=2015-02-13T11:15:00" in out.splitlines()
    assert (workdir / "events.log").exists() and (workdir / "outbox" / "sms.outbox").exists()


def test_simulate_flicker_only(workdir, capsys):
    (workdir / "flicker.scn").write_text(
        f"2015-02-10T08:00:00 SMS_TO_SOCKET S001 CFG {SERVER}\n"
        "2015-02-10T10:30:00 SAMPLE S001 0.5\n"
        "2015-02-10T10:30:02 SAMPLE S001 0.0\n"
        "2015-02-10T10:31:00 SAMPLE S001 2.0\n"
        "2015-02-10T10:31:04 SAMPLE S001 0.0\n")
    assert main(["simulate", "--scenario", "flicker.scn", "--config", "svc.conf"]) == 0
    out = kv(capsys.readouterr().out)
    assert out["events"] == "0" and out["alarms"] == "0"


def test_simulate_bad_line_number(workdir, capsys):
    lines = cooker_scenario().splitlines()
    lines[6] = "2015-02-11T10:30:05 SAMPLE S001 lots"
    (workdir / "bad.scn").write_text("\n".join(lines) + "\n")
    assert main(["simulate", "--scenario", "bad.scn", "--config", "svc.conf"]) == 1
    assert "line 7" in capsys.readouterr().err


def test_simulate_fresh_restarts_state(workdir, capsys):
    (workdir / "cooker.scn").write_text(cooker_scenario())
    args = ["simulate", "--scenario", "cooker.scn", "--config", "svc.conf"]
    main(args)
    log = (workdir / "events.log").read_bytes()
    capsys.readouterr()
    main(args)  # resumes: everything is already known
    assert (workdir / "events.log").read_bytes() == log
    assert kv(capsys.readouterr().out)["alarms"] == "0"
    main(args + ["--fresh"])
    assert (workdir / "events.log").read_bytes() == log
    assert kv(capsys.readouterr().out)["alarms"] == "1"


def test_replay_and_report(workdir, capsys):
    (workdir / "cooker.scn").write_text(cooker_scenario())
    main(["simulate", "--scenario", "cooker.scn", "--config", "svc.conf"])
    capsys.readouterr()

    assert main(["replay", "--log", "events.log"]) == 0
    assert capsys.readouterr().out.splitlines() == [
        "alarm=S001/2015-02-13/10 raised_at=2015-02-13T11:15:00", "alarms=1"]

    # pattern was consumed by the alarm: empty table
    assert main(["report", "--log", "events.log", "--socket", "S001"]) == 0
    assert capsys.readouterr().out == ""

    lines = (workdir / "events.log").read_text().splitlines()[:3]
    (workdir / "three.log").write_text("\n".join(lines) + "\n")
    assert main(["report", "--log", "three.log", "--socket", "S001",
                 "--figure", "s001.png"]) == 0
    assert capsys.readouterr().out == "bin=10 window=10:00-11:00 hits=3 active=true\n"
    assert (workdir / "s001.png").read_bytes()[:4] == b"\x89PNG"


def test_replay_edge_cases(workdir, capsys):
    (workdir / "empty.log").write_text("")
    assert main(["replay", "--log", "empty.log"]) == 0
    assert capsys.readouterr().out == "alarms=0\n"
    (workdir / "bad.log").write_text(
        "2015-02-10T10:30:05\tEVENT\tS001\t2015-02-10T10:30:00\nnonsense\n"
        "2015-02-11T10:30:05\tEVENT\tS001\t2015-02-11T10:30:00\n")
    assert main(["replay", "--log", "bad.log"]) == 1
    assert "Corrupt" in capsys.readouterr().err


def test_report_unknown_socket(workdir, capsys):
    (workdir / "empty.log").write_text("")
    assert main(["report", "--log", "empty.log", "--socket", "S404"]) == 1
    assert "UnknownSocket" in capsys.readouterr().err


def test_replay_engine_flags(workdir, capsys):
    (workdir / "cooker.scn").write_text(cooker_scenario())
    main(["simulate", "--scenario", "cooker.scn", "--config", "svc.conf"])
    capsys.readouterr()
    assert main(["replay", "--log", "events.log", "--pattern-days", "4"]) == 0
    assert capsys.readouterr().out == "alarms=0\n"
    assert main(["replay", "--log", "events.log", "--bin-size", "7"]) == 1


def test_serve_missing_config(workdir, capsys):
    assert main(["serve", "--config", "nope.conf"]) == 1
    assert "nope.conf" in capsys.readouterr().err


def test_serve_input_file(workdir):
    (workdir / "frames.txt").write_text(
        "2015-02-10T10:30:05\tsim:S001\tON S001 @2015-02-10T10:30:00\n")
    with open(workdir / "svc.conf", "a") as fh:
        fh.write("input=frames.txt\n")
    assert main(["serve", "--config", "svc.conf"]) == 0
    assert (workdir / "events.log").read_text().count("EVENT") == 1


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def _spawn(workdir):
    return subprocess.Popen([sys.executable, "-m", "smartsocket", "serve", "--config", "svc.conf"],
                            cwd=workdir, stdout=subprocess.PIPE, stderr=subprocess.PIPE)


def test_serve_tcp_until_signal(workdir):
    port = free_port()
    with open(workdir / "svc.conf", "a") as fh:
        fh.write(f"listen=127.0.0.1:{port}\n")
    proc = _spawn(workdir)
    try:
        deadline = time.time() + 10
        while True:
            try:
                conn = socket.create_connection(("127.0.0.1", port), timeout=1)
                break
            except OSError:
                if time.time() > deadline or proc.poll() is not None:
                    raise
                time.sleep(0.05)
        with conn:
            conn.sendall(b"2015-02-10T10:30:05\tsim:S001\tON S001 @2015-02-10T10:30:00\n"
                         b"2015-02-10T10:31:00\tsim:S001\tNOPE\n")
        log = workdir / "events.log"
        while "EVENT" not in (log.read_text() if log.exists() else ""):
            assert time.time() < deadline
            time.sleep(0.05)
        proc.send_signal(signal.SIGTERM)
        assert proc.wait(timeout=10) == 0
    finally:
        if proc.poll() is None:
            proc.kill()
    assert "NOPE" in (workdir / "dead_letters.log").read_text()


def test_serve_port_in_use(workdir):
    with socket.socket() as busy:
        busy.bind(("127.0.0.1", 0))
        busy.listen()
        port = busy.getsockname()[1]
        with open(workdir / "svc.conf", "a") as fh:
            fh.write(f"listen=127.0.0.1:{port}\n")
        proc = _spawn(workdir)
        assert proc.wait(timeout=20) == 2
