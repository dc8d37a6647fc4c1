from datetime import datetime, timezone

TIMEZONE_UTC = timezone.utc


def now(tz=TIMEZONE_UTC) -> datetime:
    return datetime.now(tz=tz).replace(microsecond=0)


def datetime_str(datetime_: datetime) -> str:
    format_str = "%Y-%m-%d %H:%M:%S"
    return datetime_.astimezone(TIMEZONE_UTC).strftime(format_str)


def duration_str(seconds: float) -> str:
    if seconds < 1e-3:
        return f"{seconds * 1e6:.1f} µs"
    elif seconds < 1:
        return f"{seconds * 1e3:.1f} ms"
    elif seconds < 60:
        return f"{seconds:.2f} s"
    minutes, seconds = divmod(round(seconds), 60)
    hours, minutes = divmod(minutes, 60)
    parts = [(hours, "h"), (minutes, "min"), (seconds, "s")]
    return " ".join(f"{value} {unit}" for value, unit in parts if value)
