"""Drivers that push schedules through the package (the side under test)."""
import datetime as dt

from smartsocket import model
from smartsocket.codec import Envelope
from smartsocket.engine import PatternEngine
from smartsocket.gateway import Gateway
from smartsocket.model import SwitchOnEvent

DAY1 = dt.date(2015, 2, 10)


def run_schedule(times, params, n_days, start=DAY1, socket="S001"):
    """Ingest each bin's events then close it, bin after bin, day after day."""
    eng = PatternEngine(params)
    per_day = model.bins_per_day(params.bin_size_minutes)
    by_slot = {}
    for t in times:
        by_slot.setdefault((t.date(), model.bin_of(t, params.bin_size_minutes)), []).append(t)
    alarms = []
    for d in range(n_days):
        day = start + dt.timedelta(days=d)
        for b in range(per_day):
            for t in by_slot.get((day, b), []):
                eng.ingest_event(SwitchOnEvent(socket, t))
            a = eng.close_bin(socket, b, day, params.close_due(day, b))
            if a is not None:
                assert a.raised_at >= params.close_due(day, b)
                alarms.append(a)
    return eng, alarms


def run_through_gateway(times, config, n_days, start=DAY1, socket="S001"):
    """Send each event as a frame at its own time, then close out the last day."""
    gw = Gateway(config)
    for t in times:
        gw.ingest(Envelope(f"sim:{socket}", t, f"ON {socket}"))
    # last bin of the last day closes at midnight + grace; nothing later is due yet
    gw.tick(dt.datetime.combine(start + dt.timedelta(days=n_days), dt.time()) + config.params.grace)
    gw.close()
    return gw


def as_slots(times, bin_size, start=DAY1):
    return {((t.date() - start).days, model.bin_of(t, bin_size)) for t in times}
