"""Emulated jack device: serves measurement requests over a byte stream.

Stands in for the microcontroller + Wi-Fi link of the hardware prototype.
On connect it sends a hello frame, then answers each measure_request in
arrival order with a measurement_report (or a device_error).  One connection
is served at a time per emulator instance; replies are byte-deterministic
for a fixed (scene, environment, seed, request order).
"""

from __future__ import annotations

import logging
import socket
import threading
import time

from . import protocol, sensor

log = logging.getLogger(__name__)

DEFAULT_FIRMWARE = "boule-emu/0.1"


class DeviceEmulator:
    def __init__(
        self,
        scene: dict[str, float],
        env: sensor.EnvironmentConfig,
        seed: int = 0,
        latency_ms: float = 0.0,
        device_id: str = "jack-01",
        firmware: str = DEFAULT_FIRMWARE,
    ):
        if not scene:
            raise ValueError("scene must map at least one boule id to a distance")
        if not 0.0 <= latency_ms <= 5000.0:
            raise ValueError("latency_ms must be within [0, 5000]")
        self._scene = dict(scene)
        self._scene_lock = threading.Lock()
        self.env = env
        self.seed = seed
        self.latency_ms = latency_ms
        self.device_id = device_id
        self.firmware = firmware
        self._sequence_no = 0
        self._listener: socket.socket | None = None
        self._thread: threading.Thread | None = None
        self._stopping = threading.Event()

    # -- scene editing (models boules displaced by shooting) ------------------

    def set_distance(self, boule_id: str, true_distance_cm: float) -> None:
        with self._scene_lock:
            self._scene[boule_id] = true_distance_cm

    def set_scene(self, scene: dict[str, float]) -> None:
        if not scene:
            raise ValueError("scene must not be empty")
        with self._scene_lock:
            self._scene = dict(scene)

    def _lookup(self, boule_id: str) -> float | None:
        with self._scene_lock:
            return self._scene.get(boule_id)

    # -- request handling ------------------------------------------------------

    def handle_connection(self, rfile, wfile) -> None:
        """Serve one connection until EOF.  Blocking; FIFO per connection."""
        wfile.write(protocol.encode(protocol.Hello(self.device_id, self.firmware)))
        wfile.flush()
        for raw in rfile:
            reply = self._reply_for(raw)
            if reply is None:
                continue
            if self.latency_ms:
                time.sleep(self.latency_ms / 1000.0)
            wfile.write(protocol.encode(reply))
            wfile.flush()

    def _reply_for(self, raw: bytes) -> protocol.ProtocolMessage | None:
        try:
            msg = protocol.decode(raw)
        except protocol.ProtocolError as exc:
            # No request_id to echo, so the frame is dropped rather than
            # answered with an unattributable error.
            log.warning("dropping undecodable frame: %s", exc)
            return None
        if not isinstance(msg, protocol.MeasureRequest):
            log.warning("dropping unexpected %s frame", type(msg).__name__)
            return None

        true_cm = self._lookup(msg.boule_id)
        if true_cm is None:
            return protocol.DeviceError(
                msg.request_id, "malformed", f"boule {msg.boule_id!r} not in scene"
            )
        self._sequence_no += 1
        try:
            m = sensor.measure(true_cm, self.env, self.seed, self._sequence_no)
        except sensor.OutOfRangeError as exc:
            return protocol.DeviceError(
                msg.request_id, "out_of_range", f"{exc.value_cm:.2f} cm outside 2-400 cm"
            )
        return protocol.MeasurementReport(
            request_id=msg.request_id,
            boule_id=msg.boule_id,
            distance_cm=m.distance_cm,
            echo_duration_us=round(m.echo_duration_us, 1),
            environment=m.environment,
        )

    # -- TCP front end -----------------------------------------------------------

    def start(self, host: str = "127.0.0.1", port: int = 0) -> tuple[str, int]:
        """Listen in a background thread; returns the bound (host, port)."""
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind((host, port))
        listener.listen(8)
        self._listener = listener
        self._stopping.clear()
        self._thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._thread.start()
        return listener.getsockname()

    @property
    def address(self) -> tuple[str, int]:
        if self._listener is None:
            raise RuntimeError("device not started")
        return self._listener.getsockname()

    def _accept_loop(self) -> None:
        assert self._listener is not None
        while not self._stopping.is_set():
            try:
                conn, _ = self._listener.accept()
            except OSError:
                break  # listener closed
            try:
                with conn, conn.makefile("rb") as r, conn.makefile("wb") as w:
                    self.handle_connection(r, w)
            except (BrokenPipeError, ConnectionResetError):
                pass
            except Exception:
                log.exception("connection handler failed")

    def stop(self) -> None:
        self._stopping.set()
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
        if self._thread is not None:
            self._thread.join(timeout=2.0)
            self._thread = None
        self._listener = None


def serve_forever(
    scene: dict[str, float],
    env: sensor.EnvironmentConfig,
    host: str,
    port: int,
    seed: int = 0,
    latency_ms: float = 0.0,
) -> None:
    """Foreground entry point used by the CLI."""
    device = DeviceEmulator(scene, env, seed=seed, latency_ms=latency_ms)
    bound_host, bound_port = device.start(host, port)
    log.info("device emulator listening on %s:%d", bound_host, bound_port)
    print(f"device emulator listening on {bound_host}:{bound_port}", flush=True)
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        pass
    finally:
        device.stop()
