from typing import Tuple


def parse_int_list(values: str | None) -> Tuple[int, ...]:
    ints_unpacked: list[int] = []
    if values:
        try:
            for item in values.split(","):
                ints_unpacked.append(int(item.strip()))
        except ValueError:
            raise ValueError(
                "Integer lists must be in the format '3,5,7,9', "
                f"but instead got {values}"
            )
    return tuple(ints_unpacked)


def parse_attention_spec(spec: str) -> Tuple[str, str | None]:
    """Split an attention spec such as 'lowpass:0.1' into (kind, argument).

    Accepted forms are 'identity', 'lowpass:R', 'highpass:R' and 'file:PATH'.
    """
    kind, sep, argument = spec.partition(":")
    kind = kind.strip().lower()
    if kind == "identity" and not sep:
        return kind, None
    if kind in ("lowpass", "highpass") and argument:
        try:
            radius = float(argument)
        except ValueError:
            radius = -1.0
        if radius >= 0.0:
            return kind, argument
    if kind == "file" and argument:
        return kind, argument
    raise ValueError(
        "Attention must be 'identity', 'lowpass:R', 'highpass:R' or "
        f"'file:PATH' with R >= 0, but instead got {spec}"
    )
