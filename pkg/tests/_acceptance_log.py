"""Shared record of acceptance-criterion outcomes, printed in the terminal summary."""

RESULTS: dict[int, tuple[str, str, float, str]] = {}
