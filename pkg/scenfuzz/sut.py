"""
Systems under test

A SUT receives the world state every step and answers with an ego action
before a wall-clock deadline. ``make_sut`` turns a CLI handle into one:

    builtin            the baseline autopilot
    null               never answers
    tcp://host:port    newline-delimited JSON over TCP
    stdio:<command>    newline-delimited JSON over a child process' pipes
"""

import json
import logging
import os
import selectors
import shlex
import socket
import subprocess
import time
from abc import ABC, abstractmethod
from typing import Any, Dict, Optional, Sequence

from .autopilot import Autopilot
from .config import AutopilotConfig, SimulationConfig
from .exceptions import ConfigError, SutProtocolError, SutTimeout, SutUnreachable
from .helpers import dumps_line
from .maps import MapModel
from .state import Action, WorldState

logger = logging.getLogger(__name__)


class SutHandle(ABC):
    """One connection to a system under test, for one rollout"""

    deadline: float = 1.0

    def start(self, handshake: Dict[str, Any]) -> None:
        """Send the rollout handshake (dt, horizon, route, map)"""

    @abstractmethod
    def act(self, world: WorldState) -> Action:
        """
        Ego action for the next step

        Raises:
            SutTimeout: no answer within the deadline
        """

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


class BuiltinSut(SutHandle):
    def __init__(self, autopilot: Autopilot):
        self.autopilot = autopilot

    def act(self, world: WorldState) -> Action:
        return self.autopilot.act(world)


class NullSut(SutHandle):
    """A SUT that never answers: every call waits out the deadline"""

    def __init__(self, deadline: float = 1.0):
        self.deadline = deadline

    def act(self, world: WorldState) -> Action:
        time.sleep(self.deadline)
        raise SutTimeout(f"no action within {self.deadline}s")


def world_message(world: WorldState, map_ref: str) -> Dict[str, Any]:
    ego = world.ego
    return {
        "t": world.time,
        "ego": ego.to_dict(),
        "agents": [a.to_dict() for a in world.others("ego")],
        "map_ref": map_ref,
    }


def decode_action(
    message: Dict[str, Any], world: WorldState, map_model: MapModel, simulation: SimulationConfig
) -> Action:
    """
    Ego action from a wire reply

    Raises:
        SutProtocolError: the reply is neither a throttle/steer nor a
            target speed/lane command
    """
    try:
        if "throttle" in message:
            throttle = min(max(float(message["throttle"]), -1.0), 1.0)
            steer = min(max(float(message.get("steer", 0.0)), -1.0), 1.0)
            accel = throttle * (simulation.accel_max if throttle >= 0 else -simulation.accel_min)
            return Action(accel=accel, yaw_rate=steer * simulation.max_yaw_rate, label="external")
        if "target_speed" in message:
            target = max(float(message["target_speed"]), 0.0)
            lane = message.get("target_lane") or world.ego.lane or world.ego_lane
            path = map_model.successor_chain(lane) if lane in map_model.lanes else ()
            return Action(accel=target - world.ego.speed, path=path, label="external")
    except (TypeError, ValueError) as e:
        raise SutProtocolError(f"malformed action {message!r}: {e}")
    raise SutProtocolError(f"unrecognised action {message!r}")


class JsonLineSut(SutHandle):
    """Shared newline-delimited JSON protocol"""

    def __init__(self, map_model: MapModel, simulation: SimulationConfig):
        self.map = map_model
        self.simulation = simulation
        self.deadline = simulation.sut_deadline
        self._buffer = b""

    @abstractmethod
    def _send(self, data: bytes) -> None:
        ...

    @abstractmethod
    def _read_chunk(self, timeout: float) -> bytes:
        """Next bytes from the SUT; empty when the stream closed"""

    def _read_line(self) -> Dict[str, Any]:
        end = time.monotonic() + self.deadline
        while b"\n" not in self._buffer:
            remaining = end - time.monotonic()
            if remaining <= 0:
                raise SutTimeout(f"no action within {self.deadline}s")
            chunk = self._read_chunk(remaining)
            if not chunk:
                raise SutTimeout("SUT closed the connection")
            self._buffer += chunk
        line, self._buffer = self._buffer.split(b"\n", 1)
        try:
            return json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise SutProtocolError(f"reply is not JSON: {e}")

    def start(self, handshake: Dict[str, Any]) -> None:
        self._send((dumps_line({"type": "handshake", **handshake}) + "\n").encode("utf-8"))

    def act(self, world: WorldState) -> Action:
        self._send((dumps_line(world_message(world, self.map.name)) + "\n").encode("utf-8"))
        try:
            reply = self._read_line()
            return decode_action(reply, world, self.map, self.simulation)
        except SutProtocolError as e:
            raise SutTimeout(str(e))


class TcpSut(JsonLineSut):
    def __init__(self, host: str, port: int, map_model: MapModel, simulation: SimulationConfig):
        super().__init__(map_model, simulation)
        try:
            self.sock = socket.create_connection((host, port), timeout=self.deadline)
        except OSError as e:
            raise SutUnreachable(f"cannot connect to {host}:{port}: {e}")

    def _send(self, data: bytes) -> None:
        try:
            self.sock.sendall(data)
        except OSError as e:
            raise SutTimeout(f"send failed: {e}")

    def _read_chunk(self, timeout: float) -> bytes:
        self.sock.settimeout(timeout)
        try:
            return self.sock.recv(65536)
        except socket.timeout:
            raise SutTimeout(f"no action within {self.deadline}s")
        except OSError as e:
            raise SutTimeout(f"receive failed: {e}")

    def close(self) -> None:
        self.sock.close()


class StdioSut(JsonLineSut):
    def __init__(self, command: str, map_model: MapModel, simulation: SimulationConfig):
        super().__init__(map_model, simulation)
        try:
            self.proc = subprocess.Popen(
                shlex.split(command), stdin=subprocess.PIPE, stdout=subprocess.PIPE
            )
        except OSError as e:
            raise SutUnreachable(f"cannot start '{command}': {e}")
        self.selector = selectors.DefaultSelector()
        self.selector.register(self.proc.stdout, selectors.EVENT_READ)

    def _send(self, data: bytes) -> None:
        try:
            self.proc.stdin.write(data)
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise SutTimeout(f"send failed: {e}")

    def _read_chunk(self, timeout: float) -> bytes:
        if not self.selector.select(timeout):
            raise SutTimeout(f"no action within {self.deadline}s")
        return os.read(self.proc.stdout.fileno(), 65536)

    def close(self) -> None:
        self.selector.close()
        if self.proc.poll() is None:
            self.proc.terminate()
            try:
                self.proc.wait(timeout=1.0)
            except subprocess.TimeoutExpired:
                self.proc.kill()


def validate_handle(handle: str) -> str:
    """
    Raises:
        ConfigError: the handle names no known SUT kind
    """
    if handle in ("builtin", "null") or handle.startswith("stdio:"):
        return handle
    if handle.startswith("tcp://"):
        host, _, port = handle[len("tcp://"):].rpartition(":")
        if host and port.isdigit():
            return handle
    raise ConfigError(f"unknown SUT handle '{handle}'")


def make_sut(
    handle: str,
    map_model: MapModel,
    route: Sequence[str],
    autopilot: Optional[AutopilotConfig] = None,
    simulation: Optional[SimulationConfig] = None,
    cruise_speed: Optional[float] = None,
) -> SutHandle:
    """
    Build a SUT for one rollout

    Raises:
        ConfigError: unknown handle
        SutUnreachable: an external SUT cannot be reached
    """
    simulation = simulation or SimulationConfig()
    validate_handle(handle)
    if handle == "builtin":
        return BuiltinSut(Autopilot(map_model, route, autopilot, simulation, cruise_speed))
    if handle == "null":
        return NullSut(simulation.sut_deadline)
    if handle.startswith("stdio:"):
        return StdioSut(handle[len("stdio:"):], map_model, simulation)
    host, _, port = handle[len("tcp://"):].rpartition(":")
    return TcpSut(host, int(port), map_model, simulation)
