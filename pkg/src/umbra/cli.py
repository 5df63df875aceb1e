"""Command-line interface.

Subcommands: init, chain, register, share, request, acquire, pay,
events, inspect, report. The workspace directory comes from --workspace,
else the UMBRA_WORKSPACE environment variable, else ./.umbra.

Exit codes: 0 success, 1 domain error (refused operations, integrity
failures, missing material), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__, abe, protocols, report as report_mod
from .capsule import MODE_FINE, MODE_PAYMENT, Metadata
from .chain import ControlChain
from .config import WorkspaceConfig
from .crypto import keygen
from .errors import UmbraError, WorkspaceError
from .protocols import RegistrationRecord
from .storage import StorageChain, is_address
from .workspace import Workspace, resolve_root

_REDACT_THRESHOLD = 96  # payload fields longer than this are summarized


class UsageError(Exception):
    """Invalid flag combination; maps to exit code 2."""


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_help()
        return 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except UmbraError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="umbra",
        description="Privacy-preserving, access-controlled data sharing "
        "over simulated control and storage chains.",
    )
    parser.add_argument("--version", action="version", version=f"umbra {__version__}")
    sub = parser.add_subparsers(dest="command")

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--workspace", "-w", help="workspace directory")
        p.add_argument("--json", action="store_true", help="machine-readable output")

    p = sub.add_parser("init", help="deploy a sharing system into a fresh workspace")
    common(p)
    p.add_argument("--mode", choices=(MODE_FINE, MODE_PAYMENT), default=MODE_FINE)
    p.add_argument("--organizers", type=int, default=3)
    p.add_argument("--threshold", type=int, default=2)
    p.add_argument("--attributes", default="", help="comma-separated attribute universe")
    p.add_argument("--seed", default="", help="hex seed for deterministic runs")
    p.add_argument("--kdf-cost", type=int, default=None)
    p.add_argument("--funding", type=int, default=None)
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("chain", help="manage peer chains")
    common(p)
    p.add_argument("action", choices=("add", "list"))
    p.add_argument("--control", action="store_true", help="add a control chain")
    p.add_argument("--storage", action="store_true", help="add a storage chain")
    p.set_defaults(func=cmd_chain)

    p = sub.add_parser("register", help="enroll a participant")
    common(p)
    p.add_argument("name", help="keystore name for the participant")
    p.add_argument("--attrs", default="", help="comma-separated attributes")
    p.add_argument("--approvers", default="", help="organizer key names (default all)")
    p.add_argument("--reject", default="", help="organizer key names that reject")
    p.add_argument("--chain", type=int, default=None, help="peer control chain index")
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("share", help="protect and distribute a payload")
    common(p)
    p.add_argument("file", help="payload file")
    p.add_argument("--as", dest="actor", required=True, help="provider key name")
    p.add_argument("--policy", default=None, help="access policy (fine mode)")
    p.add_argument("--price", type=int, default=None, help="price (payment mode)")
    p.add_argument("--payee", default=None, help="payee key name (payment mode)")
    p.add_argument("--title", default="")
    p.add_argument("--preview", default="")
    p.add_argument("--chain", type=int, default=None, help="peer chain index")
    p.set_defaults(func=cmd_share)

    p = sub.add_parser("request", help="request access to a shared payload")
    common(p)
    p.add_argument("address", help="metadata address")
    p.add_argument("--as", dest="actor", required=True)
    p.set_defaults(func=cmd_request)

    p = sub.add_parser("acquire", help="authorize and decrypt a shared payload")
    common(p)
    p.add_argument("address", help="metadata address")
    p.add_argument("--as", dest="actor", required=True)
    p.add_argument("--output", "-o", default=None, help="write plaintext here")
    p.set_defaults(func=cmd_acquire)

    p = sub.add_parser("pay", help="record a payment for a token (payment mode)")
    common(p)
    p.add_argument("address", help="metadata address")
    p.add_argument("--as", dest="actor", required=True)
    p.add_argument("--amount", type=int, default=None, help="override the asking price")
    p.set_defaults(func=cmd_pay)

    p = sub.add_parser("events", help="query control chain events")
    common(p)
    p.add_argument("--kind", default=None)
    p.add_argument("--match", action="append", default=[], help="payload filter k=v")
    p.add_argument("--chain", default=None, help="chain id (default master)")
    p.add_argument("--full", action="store_true", help="do not summarize long fields")
    p.set_defaults(func=cmd_events)

    p = sub.add_parser("inspect", help="inspect an address, token, or key name")
    common(p)
    p.add_argument("target")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("report", help="run the performance sweep, write csv + figure")
    common(p)
    p.add_argument("--sizes", default=None, help="comma-separated payload sizes")
    p.add_argument("--repeats", type=int, default=3)
    p.set_defaults(func=cmd_report)

    return parser


def _open_workspace(args) -> Workspace:
    return Workspace(resolve_root(args.workspace))


def _emit(args, doc: dict, human: str) -> None:
    if args.json:
        print(json.dumps(doc, indent=1, sort_keys=True))
    else:
        print(human)


# --- commands ---

def cmd_init(args) -> int:
    ws = _open_workspace(args)
    if ws.exists():
        raise WorkspaceError(f"workspace {ws.root} is already initialized")
    attributes = tuple(a.strip() for a in args.attributes.split(",") if a.strip())
    if args.mode == MODE_FINE and not attributes:
        raise UsageError("fine mode needs --attributes")
    if args.threshold > args.organizers:
        raise UsageError("--threshold cannot exceed --organizers")
    cfg = WorkspaceConfig(
        mode=args.mode,
        seed=args.seed or os.urandom(32).hex(),
        threshold=args.threshold,
        organizers=args.organizers,
        attributes=attributes,
    )
    if args.kdf_cost is not None:
        cfg.kdf_cost = args.kdf_cost
    if args.funding is not None:
        cfg.funding = args.funding

    ws.create_layout()
    with ws:
        state: dict = {"op_counter": 0}
        rng = ws.command_rng(cfg, state)
        organizer_keys = [keygen(rng=rng) for _ in range(cfg.organizers)]
        control = ControlChain("control-0")
        storage = StorageChain(
            "storage-0", max_blob_size=cfg.max_blob, root=ws.storage_root("storage-0")
        )
        # payment mode still needs a non-empty universe for the toolkit
        universe = attributes if attributes else ("holder",)
        handle = protocols.initialize(
            control,
            storage,
            organizer_keys,
            cfg.threshold,
            universe,
            mode=cfg.mode,
            rng=rng,
            kdf_cost=cfg.kdf_cost,
            funding=cfg.funding,
        )
        ws.save_key("master-control", handle.master_control)
        ws.save_key("master-storage", handle.master_storage)
        organizer_names = []
        for i, key in enumerate(organizer_keys, start=1):
            name = f"organizer-{i}"
            ws.save_key(name, key)
            organizer_names.append(name)
        from .shamir import share_to_bytes

        for share in handle.control_shares:
            ws.save_share(f"organizer-{share.index}-control", share_to_bytes(share))
        for share in handle.storage_shares:
            ws.save_share(f"organizer-{share.index}-storage", share_to_bytes(share))

        state.update(
            {
                "master_control_chain": "control-0",
                "master_storage_chain": "storage-0",
                "distributor": handle.distributor,
                "id_manager": handle.id_manager,
                "cipher_suite": handle.cipher_suite,
                "control_linker": handle.control_linker,
                "storage_linker": handle.storage_linker,
                "seal_key": handle.seal_key.hex(),
                "abe_params": abe.params_to_bytes(handle.abe_params).hex(),
                "abe_master": abe.master_to_bytes(handle.abe_master).hex(),
                "organizer_key_names": organizer_names,
                "chain_manager": None,
                "peers": {"control": {}, "storage": {}},
            }
        )
        ws.save_config(cfg)
        ws.persist_handle(handle, state)
    _emit(
        args,
        {
            "workspace": str(ws.root),
            "mode": cfg.mode,
            "distributor": handle.distributor,
            "id_manager": handle.id_manager,
            "organizers": organizer_names,
        },
        f"initialized {cfg.mode} workspace at {ws.root}\n"
        f"  distributor  {handle.distributor}\n"
        f"  id-manager   {handle.id_manager}\n"
        f"  organizers   {', '.join(organizer_names)}",
    )
    return 0


def _load(ws: Workspace):
    cfg = ws.load_config()
    state = ws.load_state()
    return cfg, state


def _select_handle(handle, chain_index: int | None):
    if chain_index is None:
        return handle
    storage_index = None
    if handle.registry is not None and chain_index in handle.registry.storage_peers:
        storage_index = chain_index
    return protocols.peer_system(handle, chain_index, storage_index)


def cmd_chain(args) -> int:
    ws = _open_workspace(args)
    cfg, state = _load(ws)
    if args.action == "list":
        peers = state.get("peers", {"control": {}, "storage": {}})
        doc = {"master": state["master_control_chain"], "peers": peers}
        lines = [f"master control chain: {state['master_control_chain']}"]
        for idx, entry in sorted(peers["control"].items(), key=lambda kv: int(kv[0])):
            lines.append(f"  control[{idx}]  {entry['chain']}  distributor {entry['distributor']}")
        for idx, entry in sorted(peers["storage"].items(), key=lambda kv: int(kv[0])):
            lines.append(f"  storage[{idx}]  {entry['chain']}")
        _emit(args, doc, "\n".join(lines))
        return 0
    if args.control == args.storage:
        raise UsageError("chain add needs exactly one of --control / --storage")
    with ws:
        handle = ws.build_handle(cfg, state)
        handle.rng = ws.command_rng(cfg, state)
        peers = state.setdefault("peers", {"control": {}, "storage": {}})
        if args.control:
            index = len(peers["control"])
            chain_id = f"control-{index + 1}"
            chain = ControlChain(chain_id)
            peer = protocols.register_control_chain(handle, chain, index=index)
            key_name = f"chain-master-{index}"
            ws.save_key(key_name, peer.master)
            peers["control"][str(index)] = {
                "chain": chain_id,
                "distributor": peer.distributor,
                "id_manager": peer.id_manager,
                "key": key_name,
            }
            doc = {"index": index, "chain": chain_id, "distributor": peer.distributor}
            human = f"registered control chain {chain_id} at index {index}"
        else:
            index = len(peers["storage"])
            chain_id = f"storage-{index + 1}"
            chain = StorageChain(
                chain_id, max_blob_size=cfg.max_blob, root=ws.storage_root(chain_id)
            )
            peer = protocols.register_storage_chain(handle, chain, index=index)
            key_name = f"storage-master-{index}"
            ws.save_key(key_name, peer.master)
            peers["storage"][str(index)] = {
                "chain": chain_id,
                "cipher_suite": peer.cipher_suite,
                "control_linker": peer.control_linker,
                "storage_linker": peer.storage_linker,
                "key": key_name,
            }
            doc = {"index": index, "chain": chain_id}
            human = f"registered storage chain {chain_id} at index {index}"
        state["chain_manager"] = handle.chain_manager
        ws.persist_handle(handle, state)
    _emit(args, doc, human)
    return 0


def cmd_register(args) -> int:
    ws = _open_workspace(args)
    cfg, state = _load(ws)
    attrs = frozenset(a.strip() for a in args.attrs.split(",") if a.strip())
    with ws:
        handle = ws.build_handle(cfg, state)
        handle.rng = ws.command_rng(cfg, state)
        target = _select_handle(handle, args.chain)
        control_key = keygen(rng=handle.rng)
        storage_key = keygen(rng=handle.rng)
        if cfg.mode == MODE_FINE:
            approver_names = [
                n.strip() for n in args.approvers.split(",") if n.strip()
            ] or state["organizer_key_names"]
            rejector_names = [n.strip() for n in args.reject.split(",") if n.strip()]
            event = protocols.register_participant(
                target,
                RegistrationRecord(
                    control_key.public_key, storage_key.public_key, attrs
                ),
                approvals=[ws.load_key(n) for n in approver_names],
                rejections=[ws.load_key(n) for n in rejector_names],
            )
            doc = {
                "name": args.name,
                "wallet": control_key.wallet_hex,
                "event_seq": event["seq"],
            }
            human = (
                f"registered {args.name} (wallet {control_key.wallet_hex}), "
                f"event seq {event['seq']}"
            )
        else:
            if attrs:
                raise UsageError("payment mode has no attributes")
            target.control.fund(control_key.public_key, cfg.funding)
            doc = {"name": args.name, "wallet": control_key.wallet_hex}
            human = f"created and funded {args.name} (wallet {control_key.wallet_hex})"
        ws.save_key(f"{args.name}-control", control_key)
        ws.save_key(f"{args.name}-storage", storage_key)
        ws.persist_handle(handle, state)
    _emit(args, doc, human)
    return 0


def cmd_share(args) -> int:
    ws = _open_workspace(args)
    cfg, state = _load(ws)
    data = Path(args.file).read_bytes()
    if (args.policy is None) == (args.price is None):
        raise UsageError("share needs exactly one of --policy / --price")
    with ws:
        handle = ws.build_handle(cfg, state)
        handle.rng = ws.command_rng(cfg, state)
        target = _select_handle(handle, args.chain)
        provider_c = ws.load_key(f"{args.actor}-control")
        provider_s = ws.load_key(f"{args.actor}-storage")
        payee = None
        if args.payee is not None:
            payee = ws.load_key(f"{args.payee}-control").wallet_address
        result = protocols.solidify(
            target,
            provider_c,
            provider_s,
            data,
            policy=args.policy,
            price=args.price,
            payee=payee,
            title=args.title,
            preview=args.preview,
        )
        ws.persist_handle(handle, state)
    _emit(
        args,
        {
            "metadata_address": result.metadata_address,
            "token": result.token_id.hex(),
            "data_address": result.data_address,
            "capsule_address": result.capsule_address,
        },
        f"shared {args.file}\n"
        f"  metadata  {result.metadata_address}\n"
        f"  token     {result.token_id.hex()}",
    )
    return 0


def cmd_request(args) -> int:
    ws = _open_workspace(args)
    cfg, state = _load(ws)
    with ws:
        handle = ws.build_handle(cfg, state)
        handle.rng = ws.command_rng(cfg, state)
        consumer = ws.load_key(f"{args.actor}-control")
        target = protocols.locate_system(handle, args.address)
        token = protocols.requisition(target, consumer, args.address)
        ws.persist_handle(handle, state)
    _emit(
        args,
        {"token": token.hex(), "metadata_address": args.address},
        f"requested token {token.hex()}",
    )
    return 0


def cmd_acquire(args) -> int:
    ws = _open_workspace(args)
    cfg, state = _load(ws)
    with ws:
        handle = ws.build_handle(cfg, state)
        handle.rng = ws.command_rng(cfg, state)
        consumer = ws.load_key(f"{args.actor}-control")
        try:
            plaintext = protocols.authorize_and_decrypt(handle, consumer, args.address)
        finally:
            # a denial still emits chain events; keep them on the log
            ws.persist_handle(handle, state)
    if args.output:
        Path(args.output).write_bytes(plaintext)
        _emit(
            args,
            {"output": args.output, "size": len(plaintext)},
            f"wrote {len(plaintext)} bytes to {args.output}",
        )
    else:
        sys.stdout.buffer.write(plaintext)
        sys.stdout.buffer.flush()
    return 0


def cmd_pay(args) -> int:
    ws = _open_workspace(args)
    cfg, state = _load(ws)
    with ws:
        handle = ws.build_handle(cfg, state)
        handle.rng = ws.command_rng(cfg, state)
        customer = ws.load_key(f"{args.actor}-control")
        try:
            target = protocols.locate_system(handle, args.address)
            caps, _ = protocols.acquisition(target, args.address)
            if caps.mode != MODE_PAYMENT:
                raise UsageError("pay applies to payment-mode shares")
            token = target.control.resolve_metadata(target.distributor, args.address)
            amount = caps.price if args.amount is None else args.amount
            receipt = target.control.pay(customer, caps.payee, amount, memo=token.hex())
        finally:
            ws.persist_handle(handle, state)
    _emit(
        args,
        {"receipt": receipt},
        f"paid {amount} to {caps.payee.hex()} for token {token.hex()}",
    )
    return 0


def _summarize_payload(payload: dict) -> dict:
    out = {}
    for key, value in payload.items():
        if len(value) > _REDACT_THRESHOLD:
            out[key] = f"<{len(value) // 2} bytes>"
        else:
            out[key] = value
    return out


def cmd_events(args) -> int:
    ws = _open_workspace(args)
    cfg, state = _load(ws)
    handle = ws.build_handle(cfg, state)
    chain = handle.control
    if args.chain is not None and args.chain != chain.chain_id:
        chain = None
        if handle.registry is not None:
            for peer in handle.registry.control_peers.values():
                if peer.chain.chain_id == args.chain:
                    chain = peer.chain
                    break
        if chain is None:
            raise WorkspaceError(f"no control chain named {args.chain!r}")
    filters = {}
    for item in args.match:
        if "=" not in item:
            raise UsageError(f"--match needs k=v, got {item!r}")
        key, _, value = item.partition("=")
        filters[key] = value
    events = chain.query_events(args.kind, **filters)
    if args.json:
        print(json.dumps(events, indent=1, sort_keys=True))
        return 0
    for event in events:
        payload = event["payload"] if args.full else _summarize_payload(event["payload"])
        fields = " ".join(f"{k}={v}" for k, v in payload.items())
        print(f"[{event['seq']:>4}] {event['kind']:<18} by {event['emitter'][:12]}.. {fields}")
    if not events:
        print("no matching events")
    return 0


def cmd_inspect(args) -> int:
    ws = _open_workspace(args)
    cfg, state = _load(ws)
    handle = ws.build_handle(cfg, state)
    target = args.target

    if ws.has_key(target) or ws.has_key(f"{target}-control"):
        name = target if ws.has_key(target) else f"{target}-control"
        pair = ws.load_key(name)
        doc = {"key": name, "wallet": pair.wallet_hex}
        if handle.control.has_account(pair.wallet_hex):
            doc["balance"] = handle.control.balance_of(pair.wallet_hex)
        _emit(args, doc, "\n".join(f"{k}: {v}" for k, v in doc.items()))
        return 0

    if is_address(target):
        sys_handle = handle
        try:
            sys_handle = protocols.locate_system(handle, target)
            meta = Metadata.from_bytes(sys_handle.storage.get(target))
        except UmbraError:
            meta = None
        if meta is not None:
            token = sys_handle.control.resolve_metadata(sys_handle.distributor, target)
            owner = sys_handle.control.owner_of(sys_handle.distributor, token)
            caps, _ = protocols.acquisition(sys_handle, target)
            doc = {
                "metadata_address": target,
                "token": token.hex(),
                "owner": owner.hex(),
                "mode": caps.mode,
                "title": meta.title,
                "preview": meta.preview,
                "data_address": meta.data_address,
                "capsule_address": meta.capsule_address,
            }
            if caps.mode == MODE_PAYMENT:
                doc["price"] = caps.price
                doc["payee"] = caps.payee.hex()
            _emit(args, doc, "\n".join(f"{k}: {v}" for k, v in doc.items()))
            return 0
        # a plain blob
        for store in [handle.storage] + (
            [p.chain for p in handle.registry.storage_peers.values()]
            if handle.registry
            else []
        ):
            if store.has(target):
                blob = store.get(target)
                doc = {"address": target, "size": len(blob), "chain": store.chain_id}
                _emit(args, doc, "\n".join(f"{k}: {v}" for k, v in doc.items()))
                return 0
        raise WorkspaceError(f"nothing stored at {target}")

    if len(target) == 32 and all(c in "0123456789abcdef" for c in target):
        token = bytes.fromhex(target)
        owner = handle.control.owner_of(handle.distributor, token)
        uri = handle.control.token_uri(handle.distributor, token)
        doc = {"token": target, "owner": owner.hex(), "metadata_address": uri}
        _emit(args, doc, "\n".join(f"{k}: {v}" for k, v in doc.items()))
        return 0

    raise WorkspaceError(f"cannot interpret target {target!r}")


def cmd_report(args) -> int:
    ws = _open_workspace(args)
    cfg, _state = _load(ws)
    sizes = report_mod.DEFAULT_SIZES
    if args.sizes:
        sizes = tuple(int(s.strip()) for s in args.sizes.split(",") if s.strip())
    rows = report_mod.run_sweep(sizes, repeats=args.repeats, kdf_cost=cfg.kdf_cost)
    reports_dir = ws.root / "reports"
    reports_dir.mkdir(parents=True, exist_ok=True)
    csv_path = reports_dir / "performance.csv"
    png_path = reports_dir / "performance.png"
    report_mod.write_csv(rows, csv_path)
    report_mod.render_figure(rows, png_path)
    if args.json:
        print(json.dumps({"rows": rows, "csv": str(csv_path), "figure": str(png_path)}, indent=1))
    else:
        print(",".join(report_mod.CSV_COLUMNS))
        for row in rows:
            print(",".join(str(row[c]) for c in report_mod.CSV_COLUMNS))
        print(f"wrote {csv_path} and {png_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
