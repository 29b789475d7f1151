"""Command-line interface.

Artifacts are FESKL1 containers.  Keys hold only handle ids for their
qubits; the simulated qubits live in a separate qstore file that ``keygen``
extends and ``decrypt``/``delete`` mutate under a file lock.

Exit codes: 0 success, 1 usage, 2 cryptographic or verification failure,
3 linearity violation, 4 feasibility or budget error.
"""
from __future__ import annotations

import json
import os
import sys
import tempfile
from dataclasses import dataclass
from typing import Callable, Optional

import click
import numpy as np
from filelock import FileLock

from . import base_skfe, leasing, upgrades
from .bits import as_bits, to_str
from .circuit_ir import parse_text
from .errors import (
    BoundError, CapabilityError, CryptoError, FeasibilityError, FesklError, FormatError, IndexRangeError,
    LinearityError,
)
from .qmem import open_store
from .serialization import (
    KIND_CERT, KIND_CT, KIND_FSK, KIND_MSK, KIND_VK, SECTION_LEVEL, SECTION_QSTORE, dump_artifact,
    load_artifact,
)

EXIT_OK, EXIT_USAGE, EXIT_CRYPTO, EXIT_LINEARITY, EXIT_FEASIBILITY = 0, 1, 2, 3, 4
LEVELS = ("base", "indexed", "sbskl", "skl", "adaptive")


class Reject(Exception):
    """Verification said no."""


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, (LinearityError, CapabilityError)):
        return EXIT_LINEARITY
    if isinstance(exc, (FeasibilityError, BoundError, IndexRangeError)):
        return EXIT_FEASIBILITY
    if isinstance(exc, (CryptoError, FormatError, Reject)):
        return EXIT_CRYPTO
    return EXIT_USAGE


# ------------------------------------------------------------- level table

@dataclass(frozen=True)
class Level:
    setup: Callable
    kg: Callable                      # (msk, f, n, store, rng) -> (key, vk)
    enc: Callable                     # (msk, x, index, rng) -> ct
    dec: Callable                     # (key, ct, store) -> bits
    cert: Optional[Callable] = None
    vrfy: Optional[Callable] = None
    leased: bool = True


def _need_index(index):
    if index is None:
        raise click.UsageError("--index is required at the indexed level")
    return index


def _setup_base(q, n, rng, o):
    return base_skfe.skfe_setup(128, q, o["backend"], rng, n_in=o["n_in"], n_gates_max=o["gates"],
                                n_out=o["n_out"])


def _setup_indexed(q, n, rng, o):
    return leasing.i_setup(128, q, n, rng, backend=o["backend"], n_in=o["n_in"], n_gates_max=o["gates"],
                           n_out=o["n_out"])


def _cfg(o) -> leasing.SblConfig:
    return leasing.SblConfig(n_in=o["n_in"])


LEVEL_OPS = {
    "base": Level(
        _setup_base,
        lambda msk, f, n, store, rng: (base_skfe.skfe_kg(msk, f), None),
        lambda msk, x, index, rng: base_skfe.skfe_enc(msk, x, rng),
        lambda key, ct, store: base_skfe.skfe_dec(key, ct),
        leased=False),
    "indexed": Level(
        _setup_indexed,
        lambda msk, f, n, store, rng: leasing.i_kg(msk, f, store, rng),
        lambda msk, x, index, rng: leasing.i_enc(msk, _need_index(index), x, rng),
        leasing.i_dec, leasing.i_cert, leasing.i_vrfy),
    "sbskl": Level(
        lambda q, n, rng, o: leasing.sb_setup(128, q, n, rng, _cfg(o)),
        lambda msk, f, n, store, rng: leasing.sb_kg(msk, f, store, rng),
        lambda msk, x, index, rng: leasing.sb_enc(msk, x, rng),
        leasing.sb_dec, leasing.sb_cert, leasing.sb_vrfy),
    "skl": Level(
        lambda q, n, rng, o: leasing.skl_setup(128, q, rng, levels=o["levels"], cfg=_cfg(o)),
        leasing.skl_kg,
        lambda msk, x, index, rng: leasing.skl_enc(msk, x, rng),
        leasing.skl_dec, leasing.skl_cert, leasing.skl_vrfy),
    "adaptive": Level(
        lambda q, n, rng, o: upgrades.ada_setup(128, q, rng, n_in=o["n_in"], levels=o["levels"]),
        upgrades.ada_kg,
        lambda msk, x, index, rng: upgrades.ada_enc(msk, x, rng),
        upgrades.ada_dec, upgrades.ada_cert, upgrades.ada_vrfy),
}


# ---------------------------------------------------------------- file i/o

def _atomic_write(path: str, data: bytes) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".feskl-", dir=d)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read(path: str, kind: int):
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as e:
        raise click.UsageError(f"cannot read {path}: {e.strerror}") from None
    obj, sections = load_artifact(data, expect=kind)
    level = sections.get(SECTION_LEVEL, b"").decode()
    if level not in LEVEL_OPS:
        raise FormatError(f"{path}: missing or unknown level section")
    return obj, level, sections


def _write(path: str, kind: int, obj, level: str, **extra) -> None:
    _atomic_write(path, dump_artifact(kind, obj, level=level.encode(), **extra))


def _rng(seed: Optional[int]) -> np.random.Generator:
    return np.random.default_rng(seed)


def _store_path(sections: dict, override: Optional[str]) -> str:
    if override:
        return override
    if SECTION_QSTORE not in sections:
        raise click.UsageError("key has no qstore reference; pass --qstore")
    return sections[SECTION_QSTORE].decode()


def _parse_bits(text: str):
    text = "".join(text.split())
    if not text or set(text) - {"0", "1"}:
        raise click.UsageError("input must be a string of 0/1 characters")
    return as_bits([int(c) for c in text])


def _leased(level: str) -> Level:
    ops = LEVEL_OPS[level]
    if not ops.leased:
        raise click.UsageError(f"the {level} level has no key leasing")
    return ops


# ---------------------------------------------------------------- commands

seed_opt = click.option("--seed", type=int, envvar="FESKL_SEED", default=None, help="RNG seed (default: OS entropy).")
qstore_opt = click.option("--qstore", type=click.Path(dir_okay=False), envvar="FESKL_QSTORE", default=None,
                          help="Simulated qubit store file.")


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def main():
    """Functional encryption with secure key leasing (simulated qubits)."""


@main.command()
@click.option("--level", type=click.Choice(LEVELS), envvar="FESKL_LEVEL", default="skl", show_default=True)
@click.option("--q", type=int, envvar="FESKL_Q", default=2, show_default=True, help="Collusion bound.")
@click.option("--n", type=int, envvar="FESKL_N", default=8, show_default=True,
              help="Index space (indexed) or availability bound (sbskl).")
@click.option("--backend", type=click.Choice(base_skfe.BACKENDS), envvar="FESKL_BACKEND", default="crypto",
              show_default=True)
@click.option("--n-in", type=int, default=4, show_default=True)
@click.option("--n-out", type=int, default=1, show_default=True)
@click.option("--gates", type=int, default=8, show_default=True, help="Gate budget (base and indexed).")
@click.option("--levels", type=int, envvar="FESKL_LEVELS", default=leasing.SKL_LEVELS, show_default=True,
              help="Number of availability levels (skl, adaptive).")
@click.option("--out", "out", type=click.Path(dir_okay=False), required=True)
@seed_opt
def setup(level, q, n, backend, n_in, n_out, gates, levels, out, seed):
    """Create a master secret key."""
    o = dict(backend=backend, n_in=n_in, n_out=n_out, gates=gates, levels=levels)
    msk = LEVEL_OPS[level].setup(q, n, _rng(seed), o)
    _write(out, KIND_MSK, msk, level)
    click.echo(f"{level} master key written to {out}")


@main.command()
@click.option("--msk", "msk_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--circuit", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--n", type=int, envvar="FESKL_N", default=1, show_default=True, help="Availability bound.")
@qstore_opt
@click.option("--out", "out", type=click.Path(dir_okay=False), required=True)
@click.option("--vk-out", type=click.Path(dir_okay=False), default=None, help="Default: <out>.vk")
@seed_opt
def keygen(msk_path, circuit, n, qstore, out, vk_out, seed):
    """Issue a (leased) function key; advances the master key's counter."""
    with open(circuit) as fh:
        f = parse_text(fh.read())
    rng = _rng(seed)
    with FileLock(msk_path + ".lock"):
        msk, level, _ = _read(msk_path, KIND_MSK)
        ops = LEVEL_OPS[level]
        if not ops.leased:
            key, _ = ops.kg(msk, f, n, None, rng)
            _write(out, KIND_FSK, key, level)
        else:
            if not qstore:
                raise click.UsageError("--qstore is required for leased keys")
            with open_store(qstore, create=True) as store:
                key, vk = ops.kg(msk, f, n, store, rng)
            _write(out, KIND_FSK, key, level, qstore=os.path.abspath(qstore).encode())
            _write(vk_out or out + ".vk", KIND_VK, vk, level)
        _write(msk_path, KIND_MSK, msk, level)
    extra = f" at level {key.level}" if isinstance(key, leasing.SklLeasedKey) else ""
    click.echo(f"key written to {out}{extra}")


@main.command()
@click.option("--msk", "msk_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--x", "x_text", default=None, help="Plaintext bits, e.g. 1011.")
@click.option("--in", "in_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="File holding the plaintext bits.")
@click.option("--index", type=int, envvar="FESKL_INDEX", default=None, help="Encryption index (indexed level).")
@click.option("--out", "out", type=click.Path(dir_okay=False), required=True)
@seed_opt
def encrypt(msk_path, x_text, in_path, index, out, seed):
    """Encrypt a bit string."""
    if (x_text is None) == (in_path is None):
        raise click.UsageError("give exactly one of --x and --in")
    if in_path is not None:
        with open(in_path) as fh:
            x_text = fh.read()
    x = _parse_bits(x_text)
    msk, level, _ = _read(msk_path, KIND_MSK)
    ct = LEVEL_OPS[level].enc(msk, x, index, _rng(seed))
    _write(out, KIND_CT, ct, level)
    click.echo(f"ciphertext written to {out}")


@main.command()
@click.option("--key", "key_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--in", "in_path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Ciphertext file.")
@qstore_opt
def decrypt(key_path, in_path, qstore):
    """Decrypt and print f(x).  Consumes the qubits of the index used."""
    key, level, sections = _read(key_path, KIND_FSK)
    ct, ct_level, _ = _read(in_path, KIND_CT)
    if ct_level != level:
        raise click.UsageError(f"key is {level}-level, ciphertext is {ct_level}-level")
    ops = LEVEL_OPS[level]
    if not ops.leased:
        y = ops.dec(key, ct, None)
    else:
        with open_store(_store_path(sections, qstore)) as store:
            y = ops.dec(key, ct, store)
    click.echo(to_str(y))


@main.command()
@click.option("--key", "key_path", type=click.Path(exists=True, dir_okay=False), required=True)
@qstore_opt
@click.option("--out", "out", type=click.Path(dir_okay=False), required=True, help="Certificate file.")
def delete(key_path, qstore, out):
    """Delete a leased key and write its deletion certificate."""
    key, level, sections = _read(key_path, KIND_FSK)
    ops = _leased(level)
    with open_store(_store_path(sections, qstore)) as store:
        cert = ops.cert(key, store)
    _write(out, KIND_CERT, cert, level)
    click.echo(f"certificate written to {out}")


@main.command()
@click.option("--vk", "vk_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--in", "in_path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Certificate file.")
def verify(vk_path, in_path):
    """Print ACCEPT or REJECT; REJECT exits with code 2."""
    vk, level, _ = _read(vk_path, KIND_VK)
    cert, cert_level, _ = _read(in_path, KIND_CERT)
    ok = cert_level == level and bool(_leased(level).vrfy(vk, cert))
    click.echo("ACCEPT" if ok else "REJECT")
    if not ok:
        raise Reject()


@main.group()
def game():
    """Security-experiment harness (smoke tests, not proofs)."""


@game.command("run")
@click.argument("name")
@click.option("--adversary", required=True)
@click.option("--trials", type=int, default=1000, show_default=True)
@seed_opt
@click.option("--json", "as_json", is_flag=True, help="Print a machine-readable record instead of text.")
def game_run(name, adversary, trials, seed, as_json):
    from . import games
    report = games.run(name, adversary, trials, seed or 0)
    click.echo(json.dumps(report.to_dict(), sort_keys=True) if as_json else report.to_text())


@game.command("list")
def game_list():
    from . import games
    click.echo("experiments: " + " ".join(games.EXPERIMENTS))
    click.echo("adversaries: " + " ".join(games.canonical_adversaries()))


@main.command()
@click.option("--criterion", "-c", type=int, multiple=True, help="Run only these criteria (repeatable).")
def selftest(criterion):
    """Run the acceptance criteria; exit 2 if any fails."""
    from . import acceptance
    results = acceptance.run_all(criterion or None, echo=click.echo)
    if not all(r.passed for r in results):
        raise Reject()


def run(argv=None) -> int:
    try:
        main.main(args=argv, prog_name="feskl", standalone_mode=False)
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except click.ClickException as e:
        e.show()
        return EXIT_USAGE
    except Reject:
        return EXIT_CRYPTO
    except FesklError as e:
        click.echo(f"error: {e}", err=True)
        return exit_code(e)
    return EXIT_OK


def entry() -> None:
    sys.exit(run())
