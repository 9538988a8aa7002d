"""Fixed-point simulation time: integer ticks of 0.01 microseconds."""

TICKS_PER_US = 100


def to_ticks(us: float) -> int:
    if us < 0:
        raise ValueError(f"negative duration {us} us")
    return round(us * TICKS_PER_US)


def to_us(ticks: int) -> float:
    return ticks / TICKS_PER_US
