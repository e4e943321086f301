"""Asynchronous tap: hands captured exchanges to the filter/store pipeline
without ever blocking the forwarding path. A saturated queue drops the
capture (counted), never the participant's page load."""

from __future__ import annotations

import logging
import queue
import threading
from dataclasses import dataclass

from ..errors import ValidationError
from ..exchange import Exchange
from .decision import CaptureDecision
from .metrics import DROPS_QUEUE, CAPTURES_TAPPED, Metrics

logger = logging.getLogger("paneltap.proxy")


@dataclass(frozen=True)
class TapJob:
    exchange: Exchange
    decision: CaptureDecision


class Tap:
    def __init__(self, metrics: Metrics, depth: int):
        self.metrics = metrics
        self.jobs: queue.Queue[TapJob | None] = queue.Queue(maxsize=depth)

    def offer(self, exchange: Exchange, decision: CaptureDecision) -> bool:
        """Enqueue a capture job; requires a capture decision."""
        if not decision.capture:
            raise ValidationError("tap requires a capture decision")
        try:
            self.jobs.put_nowait(TapJob(exchange=exchange, decision=decision))
        except queue.Full:
            self.metrics.inc(DROPS_QUEUE)
            return False
        self.metrics.inc(CAPTURES_TAPPED)
        return True


class PipelineWorker(threading.Thread):
    """Drains the tap queue into the pipeline; failures never propagate back
    toward forwarding."""

    def __init__(self, tap: Tap, pipeline):
        super().__init__(name="paneltap-pipeline", daemon=True)
        self.tap = tap
        self.pipeline = pipeline
        self._stop = threading.Event()

    def run(self) -> None:
        while True:
            job = self.tap.jobs.get()
            try:
                if job is None:
                    break
                self.pipeline.process(job)
            except Exception:
                logger.exception("pipeline error (capture dropped)")
            finally:
                self.tap.jobs.task_done()

    def stop(self) -> None:
        self._stop.set()
        self.tap.jobs.put(None)

    def drain(self, timeout: float = 10.0, settle: float = 0.2) -> None:
        """Block until the queue has been idle for `settle` seconds - covers
        the window between a response finishing on the wire and its tap job
        being enqueued by the serving thread."""
        import time

        deadline = time.monotonic() + timeout
        quiet_since = None
        while time.monotonic() < deadline:
            if self.tap.jobs.unfinished_tasks == 0:
                if quiet_since is None:
                    quiet_since = time.monotonic()
                elif time.monotonic() - quiet_since >= settle:
                    return
            else:
                quiet_since = None
            time.sleep(0.02)
