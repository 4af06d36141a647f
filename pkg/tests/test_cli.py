import json
import math
from pathlib import Path

import pytest

from khessian.cli import main


def write_cfg(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_rows(path):
    lines = Path(path).read_text().strip().splitlines()
    cols = lines[0].split(",")
    return cols, [[float(v) for v in ln.split(",")] for ln in lines[1:]]


class TestProfileCommand:
    def test_profile_table_values(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "p.cfg", """
            command = profile
            k = 1
            n = 2
            f = power:3
            weight = constant:1
        """)
        out = tmp_path / "out"
        assert main(["--config", cfg, "--out", str(out)]) == 0
        cols, rows = read_rows(out / "profile.csv")
        assert cols == ["t", "phi", "phi_prime", "M", "predicted"]
        row1 = min(rows, key=lambda r: abs(r[0] - 1.0))
        assert abs(row1[0] - 1.0) < 1e-12
        assert row1[1] == pytest.approx(math.sqrt(2.0), abs=1e-6)
        header = json.loads((out / "profile.json").read_text())
        assert header["C_f"] == pytest.approx(2.0, abs=1e-3)
        assert header["C_m"] == pytest.approx(1.0, abs=1e-6)
        assert header["ko_ok"] is True

    def test_byte_identical_reruns(self, tmp_path):
        cfg = write_cfg(tmp_path, "p.cfg", """
            command = profile
            k = 2
            n = 3
            f = power:5
            weight = constant:1
        """)
        outs = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            assert main(["--config", cfg, "--out", str(out), "--quiet"]) == 0
            outs.append(out)
        for fname in ("profile.csv", "profile.json"):
            assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()


class TestRadialCommands:
    def test_radial_ivp_liouville(self, tmp_path):
        cfg = write_cfg(tmp_path, "ivp.cfg", f"""
            command = radial-ivp
            n = 2
            k = 1
            R = 1.0
            f = exp:2
            weight = constant:1
            u0 = {math.log(2.0)!r}
            tol = 1e-9
            out = liouville
        """)
        out = tmp_path / "out"
        assert main(["--config", cfg, "--out", str(out), "--quiet"]) == 0
        meta = json.loads((out / "liouville.json").read_text())
        assert meta["Rstar"] == pytest.approx(1.0, abs=1e-4)
        cols, rows = read_rows(out / "liouville.csv")
        assert cols == ["r", "u", "u1"]
        assert len(rows) > 100

    def test_radial_exhaust(self, tmp_path):
        cfg = write_cfg(tmp_path, "ex.cfg", """
            command = radial-exhaust
            n = 3
            k = 2
            R = 1.0
            f = power:5
            weight = constant:1
            j_schedule = 2,4,8
            h = 0.0078125
            tol = 1e-8
        """)
        out = tmp_path / "out"
        assert main(["--config", cfg, "--out", str(out), "--quiet"]) == 0
        meta = json.loads((out / "radial-exhaust.json").read_text())
        assert meta["monotone_ok"] is True

    def test_verify_asymptotics_pass(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "va.cfg", """
            command = verify-asymptotics
            n = 3
            k = 2
            R = 1.0
            f = power:5
            weight = constant:1
            d_lo = 1e-3
            d_hi = 1e-2
            tol = 1e-9
        """)
        out = tmp_path / "out"
        assert main(["--config", cfg, "--out", str(out)]) == 0
        assert "PASS" in capsys.readouterr().out
        meta = json.loads((out / "verify-asymptotics.json").read_text())
        assert meta["passed"] is True
        assert meta["xi"] == pytest.approx(0.5 ** (1.0 / 3.0), rel=1e-6)


class TestFdCommand:
    def test_fd_exhaust(self, tmp_path):
        cfg = write_cfg(tmp_path, "fd.cfg", """
            command = fd-exhaust
            f = exp:2
            weight = constant:1
            domain = disk:1.0
            h = 0.03125
            j_schedule = 3,4,5
            tol = 1e-8
        """)
        out = tmp_path / "out"
        assert main(["--config", cfg, "--out", str(out), "--quiet"]) == 0
        meta = json.loads((out / "fd-exhaust.json").read_text())
        assert meta["monotone_ok"] is True
        cols, rows = read_rows(out / "fd-exhaust.csv")
        assert cols == ["x", "y", "d", "u"]


class TestBarrierCommand:
    def test_check_barrier_pass(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "cb.cfg", """
            command = check-barrier
            n = 2
            k = 1
            f = exp:2
            weight = constant:1
            eps = 0.1
            samples = 100
        """)
        out = tmp_path / "out"
        assert main(["--config", cfg, "--out", str(out)]) == 0
        assert "PASS" in capsys.readouterr().out
        blob = json.loads((out / "check-barrier.json").read_text())
        assert blob["supersolution"]["passed"] and blob["subsolution"]["passed"]

    def test_gap_violation_exits_2(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "bad.cfg", """
            command = check-barrier
            n = 2
            k = 1
            f = exp:2
            weight = constant:1
            cf = 1.0
            cm = 0.0
        """)
        assert main(["--config", cfg, "--out", str(tmp_path / "out")]) == 2
        assert "(1.5)" in capsys.readouterr().err


class TestValidation:
    def test_gamma_below_k_exits_2(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "bad.cfg", """
            command = profile
            k = 2
            n = 3
            f = power:2
            weight = constant:1
        """)
        assert main(["--config", cfg, "--out", str(tmp_path / "out")]) == 2
        assert "(f2)" in capsys.readouterr().err

    def test_k_exceeds_n_exits_2(self, tmp_path):
        cfg = write_cfg(tmp_path, "bad.cfg", """
            command = radial-ivp
            n = 2
            k = 3
            f = power:5
            weight = constant:1
            u0 = 1.0
        """)
        assert main(["--config", cfg, "--out", str(tmp_path / "out")]) == 2

    def test_unknown_command_exits_2(self, tmp_path):
        cfg = write_cfg(tmp_path, "bad.cfg", "command = florble")
        assert main(["--config", cfg, "--out", str(tmp_path / "out")]) == 2

    def test_missing_required_key_exits_2(self, tmp_path):
        cfg = write_cfg(tmp_path, "bad.cfg", "command = radial-ivp\nn = 2\nk = 1")
        assert main(["--config", cfg, "--out", str(tmp_path / "out")]) == 2

    def test_bad_eps_exits_2(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "bad.cfg", """
            command = check-barrier
            n = 2
            k = 1
            f = exp:2
            weight = constant:1
            eps = 0.7
        """)
        assert main(["--config", cfg, "--out", str(tmp_path / "out")]) == 2
        assert "(3.3)" in capsys.readouterr().err
