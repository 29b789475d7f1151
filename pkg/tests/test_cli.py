import pytest

from feskl import cli
from feskl.leasing import SklLeasedKey
from feskl.serialization import KIND_FSK, KIND_MSK, load_artifact, load_container

AND01 = "in=4 out=1\nAND 0 1\n"


@pytest.fixture
def work(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "f.txt").write_text(AND01)
    return tmp_path


def feskl(capsys, *args):
    code = cli.run([str(a) for a in args])
    out = capsys.readouterr()
    return code, out.out.strip(), out.err


def test_skl_shell_roundtrip(work, capsys):
    assert feskl(capsys, "setup", "--level", "skl", "--q", 2, "--out", "msk.bin", "--seed", 1)[0] == 0
    code, out, _ = feskl(capsys, "keygen", "--msk", "msk.bin", "--circuit", "f.txt", "--n", 5,
                         "--qstore", "q.qs", "--out", "k.bin", "--seed", 2)
    assert code == 0 and "level 3" in out
    key, _ = load_artifact((work / "k.bin").read_bytes(), expect=KIND_FSK)
    assert isinstance(key, SklLeasedKey) and key.level == 3
    for seed, x, want in [(3, "1100", "1"), (4, "1011", "0")]:
        assert feskl(capsys, "encrypt", "--msk", "msk.bin", "--x", x, "--out", "ct.bin", "--seed", seed)[0] == 0
        assert feskl(capsys, "decrypt", "--key", "k.bin", "--in", "ct.bin")[:2] == (0, want)
    # decrypting the same ciphertext again hits consumed qubits
    assert feskl(capsys, "decrypt", "--key", "k.bin", "--in", "ct.bin")[0] == cli.EXIT_LINEARITY


def test_delete_then_decrypt_exits_3(work, capsys):
    feskl(capsys, "setup", "--level", "skl", "--q", 2, "--out", "msk.bin", "--seed", 1)
    feskl(capsys, "keygen", "--msk", "msk.bin", "--circuit", "f.txt", "--n", 2, "--qstore", "q.qs",
          "--out", "k.bin", "--seed", 2)
    feskl(capsys, "encrypt", "--msk", "msk.bin", "--x", "1100", "--out", "ct.bin")
    assert feskl(capsys, "delete", "--key", "k.bin", "--out", "cert.bin")[0] == 0
    assert feskl(capsys, "verify", "--vk", "k.bin.vk", "--in", "cert.bin")[:2] == (0, "ACCEPT")
    assert feskl(capsys, "decrypt", "--key", "k.bin", "--in", "ct.bin")[0] == cli.EXIT_LINEARITY
    assert feskl(capsys, "delete", "--key", "k.bin", "--out", "cert2.bin")[0] == cli.EXIT_LINEARITY


def test_verify_rejects_foreign_certificate(work, capsys):
    feskl(capsys, "setup", "--level", "sbskl", "--q", 2, "--n", 2, "--out", "msk.bin", "--seed", 1)
    for name in ("a", "b"):
        feskl(capsys, "keygen", "--msk", "msk.bin", "--circuit", "f.txt", "--qstore", "q.qs", "--out",
              f"{name}.bin")
    feskl(capsys, "delete", "--key", "b.bin", "--out", "b.cert")
    assert feskl(capsys, "verify", "--vk", "a.bin.vk", "--in", "b.cert")[:2] == (cli.EXIT_CRYPTO, "REJECT")
    assert feskl(capsys, "verify", "--vk", "b.bin.vk", "--in", "b.cert")[:2] == (0, "ACCEPT")


@pytest.mark.parametrize("level,extra", [("base", []), ("base", ["--backend", "reference"]),
                                         ("indexed", ["--n", 4]), ("adaptive", ["--levels", 3])])
def test_other_levels(work, capsys, level, extra):
    assert feskl(capsys, "setup", "--level", level, "--q", 1, "--out", "msk.bin", *extra)[0] == 0
    assert feskl(capsys, "keygen", "--msk", "msk.bin", "--circuit", "f.txt", "--n", 3, "--qstore", "q.qs",
                 "--out", "k.bin")[0] == 0
    enc = ["encrypt", "--msk", "msk.bin", "--x", "1110", "--out", "ct.bin"]
    if level == "indexed":
        assert feskl(capsys, *enc)[0] == cli.EXIT_USAGE
        enc += ["--index", 2]
    assert feskl(capsys, *enc)[0] == 0
    assert feskl(capsys, "decrypt", "--key", "k.bin", "--in", "ct.bin")[:2] == (0, "1")
    # the quota of one key is spent
    code = feskl(capsys, "keygen", "--msk", "msk.bin", "--circuit", "f.txt", "--qstore", "q.qs",
                 "--out", "k2.bin")[0]
    assert code == cli.EXIT_FEASIBILITY


def test_base_level_has_no_deletion(work, capsys):
    feskl(capsys, "setup", "--level", "base", "--out", "msk.bin")
    feskl(capsys, "keygen", "--msk", "msk.bin", "--circuit", "f.txt", "--out", "k.bin")
    assert feskl(capsys, "delete", "--key", "k.bin", "--qstore", "q.qs", "--out", "c.bin")[0] == cli.EXIT_USAGE


def test_env_vars_mirror_flags(work, capsys, monkeypatch):
    monkeypatch.setenv("FESKL_LEVEL", "indexed")
    monkeypatch.setenv("FESKL_N", "3")
    feskl(capsys, "setup", "--out", "msk.bin")
    msk, sections = load_artifact((work / "msk.bin").read_bytes(), expect=KIND_MSK)
    assert msk.N == 3
    monkeypatch.setenv("FESKL_QSTORE", "env.qs")
    assert feskl(capsys, "keygen", "--msk", "msk.bin", "--circuit", "f.txt", "--out", "k.bin")[0] == 0
    assert (work / "env.qs").exists()


def test_usage_and_format_errors(work, capsys):
    assert feskl(capsys, "setup", "--level", "nope", "--out", "m.bin")[0] == cli.EXIT_USAGE
    assert feskl(capsys, "frobnicate")[0] == cli.EXIT_USAGE
    (work / "junk.bin").write_bytes(b"not a container")
    assert feskl(capsys, "encrypt", "--msk", "junk.bin", "--x", "1", "--out", "c")[0] == cli.EXIT_CRYPTO
    feskl(capsys, "setup", "--level", "skl", "--out", "msk.bin")
    assert feskl(capsys, "encrypt", "--msk", "msk.bin", "--x", "12", "--out", "c")[0] == cli.EXIT_USAGE
    code = feskl(capsys, "keygen", "--msk", "msk.bin", "--circuit", "f.txt", "--n", 10**9, "--qstore", "q.qs",
                 "--out", "k.bin")[0]
    assert code == cli.EXIT_FEASIBILITY


def test_containers_are_tagged(work, capsys):
    feskl(capsys, "setup", "--level", "skl", "--out", "msk.bin")
    kind, sections = load_container((work / "msk.bin").read_bytes())
    assert kind == KIND_MSK and sections[3] == b"skl"


def test_game_command(work, capsys):
    code, out, _ = feskl(capsys, "game", "run", "ind-cpa-cd", "--adversary", "honest", "--trials", 20, "--seed", 3)
    assert code == 0 and out.splitlines()[0] == "experiment ind-cpa-cd"
    code, out, _ = feskl(capsys, "game", "run", "ind-cpa-cd", "--adversary", "honest", "--trials", 20,
                         "--seed", 3, "--json")
    assert code == 0 and '"trials": 20' in out
    assert feskl(capsys, "game", "run", "ind-cpa-cd", "--adversary", "ghost")[0] == cli.EXIT_USAGE


def test_selftest_exit_codes(work, capsys):
    code, out, _ = feskl(capsys, "selftest", "-c", 4, "-c", 7)
    assert code == 0 and out.count("PASS criterion") == 2
    code, out, _ = feskl(capsys, "selftest", "-c", 5)
    assert code == cli.EXIT_CRYPTO and out.startswith("FAIL criterion 5")
