#!/usr/bin/env python3
"""Play one scripted match end to end and verify the log replays cleanly.

Spins up the device emulator, scoring service and HTTP API in-process,
drives the classic two-point opening round to a 13-point win, then folds
the persisted event log back through the engine.
"""

import tempfile

from boulescope.bench import MatchRuntime, play_match
from boulescope.sensor import EnvironmentConfig
from boulescope.service import replay

SCENE = {
    "P1-1": 200.0, "P1-2": 300.0, "P1-3": 400.0,
    "P2-1": 400.0, "P2-2": 400.0, "P2-3": 400.0,
}


def main():
    with tempfile.TemporaryDirectory(prefix="boulescope-demo-") as log_dir:
        runtime = MatchRuntime(env=EnvironmentConfig.noiseless(), log_dir=log_dir)
        try:
            transcript = play_match(scene=SCENE, runtime=runtime)
            for line in transcript.lines():
                print(line)
            live = runtime.service.get_state(transcript.session_id)
            replayed = replay(transcript.log_path)
            print(f"replay check: {'ok' if replayed == live else 'MISMATCH'} "
                  f"({live.round_no} rounds, {runtime.service.get_session(transcript.session_id).event_seq} events)")
        finally:
            runtime.close()


if __name__ == "__main__":
    main()
