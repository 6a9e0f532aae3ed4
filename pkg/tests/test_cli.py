import socket
import threading
import time

import pytest

from spacelink import cli
from spacelink.endpoints import schemas as sc


def test_parse_command_forms():
    assert cli.parse_command("noop").fc == sc.FC_NOOP
    assert cli.parse_command("reset").fc == sc.FC_RESET_COUNTERS
    assert cli.parse_command("hk").fc == sc.FC_REQUEST_HK
    cmd = cli.parse_command("set:2:77")
    assert (cmd.fc, cmd.param_id, cmd.value) == (sc.FC_SET_PARAM, 2, 77)
    with pytest.raises(ValueError):
        cli.parse_command("launch")


@pytest.mark.parametrize("mode", ["none", "sdls", "quic"])
def test_ground_sim_accepts_commands(mode, capsys):
    rc = cli.ground_main(
        ["--mode", mode, "--profile", "leo", "--seed", "4", "noop", "set:1:5", "hk"]
    )
    out = capsys.readouterr().out
    assert rc == 0
    assert out.count("accepted") == 3
    assert "last hk" in out


def test_ground_sim_times_out_under_total_loss(capsys):
    rc = cli.ground_main(["--mode", "none", "--loss", "100", "noop"])
    out = capsys.readouterr().out
    assert rc == 1
    assert "timed_out" in out


def test_bench_cli_writes_csv(tmp_path, capsys):
    out_path = tmp_path / "report.csv"
    rc = cli.bench_main(
        [
            "throughput",
            "--profile",
            "leo",
            "--loss",
            "0",
            "--seed",
            "5",
            "--payload",
            "20000",
            "--out",
            str(out_path),
        ]
    )
    assert rc == 0
    text = out_path.read_text()
    assert text.splitlines()[0] == "scenario,mode,metric,value,unit,seed,profile,loss"
    assert "goodput" in text
    printed = capsys.readouterr().out
    assert "hardware-relative" in printed


def test_bench_cli_crypto_small(capsys):
    rc = cli.bench_main(["crypto", "--iters", "50"])
    assert rc == 0
    assert "quic_over_sdls_ratio" in capsys.readouterr().out


def _free_port() -> int:
    with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@pytest.mark.parametrize("mode", ["sdls", "quic"])
def test_live_socket_flight_ground(mode):
    port = _free_port()
    flight_thread = threading.Thread(
        target=cli.flight_main,
        args=(["--mode", mode, "--listen", f"127.0.0.1:{port}", "--max-seconds", "3"],),
        daemon=True,
    )
    flight_thread.start()
    time.sleep(0.3)
    rc = cli.ground_main(
        ["--mode", mode, "--live", f"127.0.0.1:{port}", "noop", "set:0:9"]
    )
    assert rc == 0
    flight_thread.join(timeout=5)
