"""Live monitoring-center service.

Hosts the telemetry TCP listener and the operator/public HTTP API over one
shared center. All mutations funnel through a single lock; readers take
consistent snapshots. In drive mode a scenario simulation is paced against
the wall clock behind the same lock, so the dashboard can watch a live
fleet without hardware.
"""

from __future__ import annotations

import json
import os
import socket
import socketserver
import threading
import time

from fastapi import Depends, FastAPI, HTTPException, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import public_api
from .config import ScenarioConfig
from .core import GeoCoordinate, DomainError
from .monitoring import MonitoringCenter, OrderStatus
from .report import dump_line
from .routing import RoutingProblem, nearest_neighbor, two_opt
from .simulation import Simulator
from .telemetry import ParseError, decode, encode_ack


def wall_ms() -> int:
    return int(time.time() * 1000)


class CenterHost:
    """Owns the center (or driven simulator), its event log, and the lock."""

    def __init__(self, config: ScenarioConfig, out_dir: str,
                 drive: bool = False, speedup: float = 60.0):
        self.config = config
        self.out_dir = out_dir
        self.drive = drive
        self.speedup = speedup
        self.lock = threading.RLock()
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        os.makedirs(out_dir, exist_ok=True)
        self.log_path = os.path.join(out_dir, "events.ndjson")
        self.snapshot_path = os.path.join(out_dir, "snapshot.json")
        self._log_fh = open(self.log_path, "w", encoding="utf-8")

        self._sim: Simulator | None = None
        self._sim_finished = False
        if drive:
            self._sim = Simulator(config, sink=self._write_line)
            self._wall0 = time.monotonic()
            with self.lock:
                self._sim.prepare()
            self.center: MonitoringCenter = self._sim.center
        else:
            self._started_at = wall_ms()
            self._write_line({
                "type": "log_header", "version": 1,
                "seed": config.seed, "config_hash": "live",
            })
            self.center = MonitoringCenter.bootstrap(
                bins=config.registry_bins(),
                zones=list(config.zones),
                trucks=config.truck_infos(),
                policy=config.monitoring_policy(),
                started_at=self._started_at,
                sink=self._write_line,
            )

    # -- plumbing ------------------------------------------------------

    def _write_line(self, line: dict) -> None:
        self._log_fh.write(dump_line(line))
        self._log_fh.flush()

    def now(self) -> int:
        if self.drive:
            assert self._sim is not None
            elapsed_ms = (time.monotonic() - self._wall0) * 1000.0 * self.speedup
            return min(self._sim.t0 + int(elapsed_ms), self._sim.t_end)
        return wall_ms()

    def start_background(self) -> None:
        if self.drive:
            t = threading.Thread(target=self._pace_loop, name="sim-pacer", daemon=True)
            t.start()
            self._threads.append(t)
        else:
            t = threading.Thread(target=self._check_loop, name="stale-check", daemon=True)
            t.start()
            self._threads.append(t)

    def _pace_loop(self) -> None:
        assert self._sim is not None
        while not self._stop.is_set():
            target = self.now()
            with self.lock:
                self._sim.step_until(target)
                if target >= self._sim.t_end and not self._sim._heap:
                    self._finish_sim_locked()
                    break
            self._stop.wait(0.05)

    def _finish_sim_locked(self) -> None:
        if self._sim is not None and not self._sim_finished:
            self._sim.finish()
            self._sim_finished = True

    def _check_loop(self) -> None:
        period_s = max(1.0, self.config.policies.dispatch_check_period_ms / 1000.0)
        while not self._stop.wait(period_s):
            with self.lock:
                self.center.process_check(self.now())

    def shutdown(self) -> None:
        self._stop.set()
        for t in self._threads:
            t.join(timeout=2.0)
        with self.lock:
            self._finish_sim_locked()
            self.write_snapshot()
            self._log_fh.flush()
            self._log_fh.close()

    def write_snapshot(self) -> None:
        snapshot = {
            "state": self.center.canonical_state(),
            "state_hash": self.center.state_hash(),
            "written_at": self.now(),
        }
        tmp = self.snapshot_path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(snapshot, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, self.snapshot_path)

    # -- telemetry -----------------------------------------------------

    def ingest_line(self, raw: bytes) -> list[bytes]:
        """Decode and ingest one wire line; returns encoded ack lines."""
        msg = decode(raw)
        with self.lock:
            now = self.now()
            if self._sim is not None:
                _result, acks = self._sim.external_ingest(msg, now)
            else:
                _result, acks, _events = self.center.process_ingest(msg, now)
        return [encode_ack(a) for a in acks]

    # -- operator mutations --------------------------------------------

    def create_order(self, bin_ids: list[str], truck_id: str,
                     idempotency_key: str | None = None):
        with self.lock:
            now = self.now()
            if self._sim is not None:
                return self._sim.external_create_order(bin_ids, truck_id, now, idempotency_key)
            order, _events = self.center.create_order(bin_ids, truck_id, now,
                                                      idempotency_key=idempotency_key)
            return order

    def set_order_status(self, order_id: str, status: OrderStatus) -> None:
        with self.lock:
            now = self.now()
            if self._sim is not None:
                self._sim.external_set_order_status(order_id, status, now)
            else:
                self.center.set_order_status(order_id, status, now)

    def preview_route(self, bin_ids: list[str], truck_id: str | None = None) -> dict:
        with self.lock:
            unknown = [b for b in bin_ids if b not in self.center.registry]
            if unknown:
                raise KeyError(f"unknown bins {unknown!r}")
            if truck_id is None:
                if not self.center.trucks:
                    raise KeyError("no trucks registered")
                truck_id = sorted(self.center.trucks)[0]
            truck = self.center.trucks.get(truck_id)
            if truck is None:
                raise KeyError(f"unknown truck {truck_id!r}")
            problem = RoutingProblem.build(
                truck.depot,
                [(b, self.center.registry[b].position) for b in sorted(set(bin_ids))],
            )
            tour = two_opt(nearest_neighbor(problem), problem)
            return {
                "truck_id": truck_id,
                "visit_order": list(tour.stop_ids),
                "route_length_m": tour.length_m,
            }


def create_app(host: CenterHost) -> FastAPI:
    app = FastAPI(title="binfleet monitoring center", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"],
    )
    app.state.host = host

    def require_operator(request: Request) -> None:
        token = request.headers.get("x-operator-token")
        if token != host.config.operator_token:
            raise HTTPException(status_code=401, detail="missing or invalid operator token")

    @app.exception_handler(ParseError)
    async def _parse_error(_req, exc: ParseError):
        return JSONResponse(status_code=400, content={"error": str(exc), "category": exc.category})

    @app.get("/healthz")
    def healthz():
        with host.lock:
            return {
                "status": "ok",
                "now": host.now(),
                "drive": host.drive,
                "bins": len(host.center.registry),
            }

    @app.get("/zones", dependencies=[Depends(require_operator)])
    def get_zones():
        with host.lock:
            return [
                {"zone_id": z.zone_id, "name": z.name,
                 "bin_ids": list(z.bin_ids), "truck_ids": list(z.truck_ids)}
                for z in host.center.zones.values()
            ]

    @app.get("/trucks", dependencies=[Depends(require_operator)])
    def get_trucks():
        with host.lock:
            return [
                {"truck_id": t.truck_id, "capacity_l": t.capacity_l,
                 "speed_kmh": t.speed_kmh, "lat": t.depot.lat_deg, "lon": t.depot.lon_deg}
                for t in sorted(host.center.trucks.values(), key=lambda t: t.truck_id)
            ]

    @app.get("/alerts", dependencies=[Depends(require_operator)])
    def get_alerts(status: str | None = Query(default=None)):
        with host.lock:
            alerts = [host.center.alerts[k].to_dict() for k in sorted(host.center.alerts)]
        if status is not None:
            wanted = status.upper()
            alerts = [a for a in alerts if a["status"] == wanted]
        return alerts

    @app.get("/orders", dependencies=[Depends(require_operator)])
    def get_orders(status: str | None = Query(default=None)):
        with host.lock:
            orders = [host.center.orders[k].to_dict() for k in sorted(host.center.orders)]
        if status is not None:
            wanted = status.upper()
            orders = [o for o in orders if o["status"] == wanted]
        return orders

    @app.post("/orders", dependencies=[Depends(require_operator)], status_code=201)
    def post_order(body: dict):
        bin_ids = body.get("bin_ids")
        truck_id = body.get("truck_id")
        if not isinstance(bin_ids, list) or not bin_ids or not isinstance(truck_id, str):
            raise HTTPException(status_code=422, detail="body needs bin_ids: [str] and truck_id: str")
        try:
            order = host.create_order(bin_ids, truck_id, body.get("idempotency_key"))
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return order.to_dict()

    @app.post("/orders/{order_id}/status", dependencies=[Depends(require_operator)])
    def post_order_status(order_id: str, body: dict):
        status = body.get("status")
        try:
            parsed = OrderStatus(status)
        except ValueError:
            raise HTTPException(status_code=422, detail=f"unknown status {status!r}") from None
        try:
            host.set_order_status(order_id, parsed)
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except ValueError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        with host.lock:
            return host.center.orders[order_id].to_dict()

    @app.post("/orders/preview", dependencies=[Depends(require_operator)])
    def post_order_preview(body: dict):
        bin_ids = body.get("bin_ids")
        if not isinstance(bin_ids, list) or not bin_ids:
            raise HTTPException(status_code=422, detail="body needs bin_ids: [str]")
        try:
            return host.preview_route(bin_ids, body.get("truck_id"))
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    @app.get("/bins/{bin_id}/forecast", dependencies=[Depends(require_operator)])
    def get_forecast(bin_id: str, threshold: float | None = Query(default=None)):
        with host.lock:
            try:
                result = host.center.forecast_full_at(bin_id, host.now(), threshold)
            except KeyError as exc:
                raise HTTPException(status_code=404, detail=str(exc)) from exc
        return {
            "bin_id": bin_id,
            "predicted_full_at": None if result.predicted_at_ms is None else round(result.predicted_at_ms),
            "reason": result.reason,
            "slope_per_ms": result.slope_per_ms,
        }

    @app.get("/public/bins")
    def public_bins(state: str | None = Query(default=None), zone: str | None = Query(default=None)):
        pol = host.config.policies
        with host.lock:
            try:
                views = public_api.list_bins(
                    host.center, host.now(), state=state, zone=zone,
                    empty_cutoff=pol.public_empty_cutoff, full_cutoff=pol.public_full_cutoff,
                )
            except public_api.ZoneNotFound as exc:
                raise HTTPException(status_code=404, detail=f"unknown zone {exc.args[0]!r}") from exc
            except ValueError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
        return [v.to_dict() for v in views]

    @app.get("/public/bins/nearest")
    def public_nearest(lat: float, lon: float, k: int = Query(default=1, ge=1)):
        pol = host.config.policies
        try:
            origin = GeoCoordinate(lat, lon)
        except DomainError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        with host.lock:
            views = public_api.nearest_available(
                host.center, origin, k, host.now(),
                empty_cutoff=pol.public_empty_cutoff, full_cutoff=pol.public_full_cutoff,
            )
        return [v.to_dict() for v in views]

    return app


class _TelemetryHandler(socketserver.StreamRequestHandler):
    def handle(self):
        host: CenterHost = self.server.center_host  # type: ignore[attr-defined]
        while True:
            raw = self.rfile.readline()
            if not raw:
                break
            raw = raw.strip()
            if not raw:
                continue
            try:
                acks = host.ingest_line(raw)
            except ParseError as exc:
                error = {"type": "error", "category": exc.category, "detail": str(exc)}
                self.wfile.write((json.dumps(error) + "\n").encode("utf-8"))
                continue
            for ack in acks:
                self.wfile.write(ack)
            self.wfile.flush()


class TelemetryServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, addr: tuple[str, int], host: CenterHost):
        super().__init__(addr, _TelemetryHandler)
        self.center_host = host


def check_bindable(addr: tuple[str, int]) -> bool:
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind(addr)
        return True
    except OSError:
        return False
    finally:
        probe.close()


def parse_addr(text: str) -> tuple[str, int]:
    host_part, _, port_part = text.rpartition(":")
    return host_part or "127.0.0.1", int(port_part)
