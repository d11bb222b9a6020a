import logging

from celery import shared_task
from django.core.cache import cache
from sentry_sdk import capture_exception

from core.utils import config_fingerprint, memcache_lock

from .config import RunConfig
from .models import SimulationRun
from .runner import run_pair


@shared_task(bind=True)
def run_sweep_member(self, cfg_payload, eps, sweep_pk=None):
    """One paired run of a sweep; returns the report dict or None if a twin is running."""
    fingerprint = config_fingerprint(cfg_payload)
    id_ = f"{self.name}-LOCK-{fingerprint}-{eps}"
    with memcache_lock(id_, self.app.oid) as acquired:
        if not acquired:
            logging.info(f"Could not acquire run lock for eps={eps}")
            return None

        cfg = RunConfig.from_payload(cfg_payload)
        run = SimulationRun.objects.create(
            mode=SimulationRun.Mode.SWEEP,
            eps=eps,
            config=cfg_payload,
            fingerprint=fingerprint,
            sweep_id=sweep_pk,
        )
        try:
            report = run_pair(cfg, eps).to_dict()
        except Exception:
            logging.exception(f"Sweep member eps={eps} failed")
            capture_exception()
            raise
        run.record(report)
        cache.delete(id_)
        return report
