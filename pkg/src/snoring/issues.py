"""Defect ticket acquisition from Jira-compatible endpoints or JSON exports.

Normalization is a pure function of the raw issue JSON, so fetching to a
page cache and loading that cache later yields the same tickets as a direct
fetch.  Only defect-type tickets survive normalization.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import requests

from .errors import DegenerateDataError, InputError
from .history import Release

logger = logging.getLogger(__name__)

DEFECT_TYPES = frozenset({"bug", "defect"})
PAGE_SIZE = 50
MAX_ATTEMPTS = 5
ISSUE_FIELDS = "key,issuetype,created,resolutiondate,versions,fixVersions,status"


@dataclass(frozen=True)
class Ticket:
    key: str
    kind: str
    opened: datetime
    resolved: datetime | None
    affected_versions: tuple[str, ...]
    fixed_versions: tuple[str, ...]
    status: str

    def __post_init__(self) -> None:
        if self.resolved is not None and self.resolved < self.opened:
            raise ValueError(f"ticket {self.key}: resolved before opened")

    @property
    def is_resolved(self) -> bool:
        return self.resolved is not None


def parse_jira_instant(raw: str) -> datetime:
    """Parse Jira's ISO-ish timestamps ('2017-02-28T10:05:00.000+0000')."""
    text = raw.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    # offsets without a colon predate fromisoformat support on 3.10
    if len(text) >= 5 and text[-5] in "+-" and text[-5:][1:].isdigit():
        text = text[:-2] + ":" + text[-2:]
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt


def _normalize_issue(issue: dict) -> Ticket | None:
    """One raw Jira issue object -> Ticket, or None when not a defect."""
    key = issue["key"]
    fields = issue.get("fields", {})
    kind = ((fields.get("issuetype") or {}).get("name") or "").strip().lower()
    if kind not in DEFECT_TYPES:
        return None
    resolution_raw = fields.get("resolutiondate")
    return Ticket(
        key=key,
        kind="defect",
        opened=parse_jira_instant(fields["created"]),
        resolved=parse_jira_instant(resolution_raw) if resolution_raw else None,
        affected_versions=tuple(
            v.get("name", "") for v in fields.get("versions") or []
        ),
        fixed_versions=tuple(
            v.get("name", "") for v in fields.get("fixVersions") or []
        ),
        status=((fields.get("status") or {}).get("name") or ""),
    )


def _normalize_issues(raw_issues: list[dict], source: str) -> list[Ticket]:
    tickets = []
    for issue in raw_issues:
        try:
            ticket = _normalize_issue(issue)
        except (KeyError, TypeError, ValueError) as exc:
            logger.warning("%s: skipping malformed issue (%s)", source, exc)
            continue
        if ticket is not None:
            tickets.append(ticket)
    return tickets


def normalize_issues(raw_issues: list[dict]) -> list[Ticket]:
    """Public normalization entry point for already-fetched issue arrays."""
    return _normalize_issues(raw_issues, "raw")


def fetch_raw_issues(
    endpoint: str,
    project_key: str,
    cache_dir: str | Path | None = None,
    *,
    session: requests.Session | None = None,
    page_size: int = PAGE_SIZE,
    token: str | None = None,
    sleep=time.sleep,
) -> list[dict]:
    """Page through a Jira search endpoint, returning raw issue objects.

    All pages are retrieved (page size controls the request count) and raw
    responses are cached under <cache_dir>/<project>/issues/page-<n>.json for
    offline replay.  Transient failures retry with exponential backoff, up to
    MAX_ATTEMPTS per page.
    """
    sess = session or requests.Session()
    headers = {"Authorization": f"Bearer {token}"} if token else {}
    url = endpoint.rstrip("/") + "/rest/api/2/search"
    raw_issues: list[dict] = []
    start_at = 0
    page_no = 0
    cache_base = None
    if cache_dir is not None:
        cache_base = Path(cache_dir) / project_key / "issues"
        cache_base.mkdir(parents=True, exist_ok=True)
    while True:
        params = {
            "jql": f"project={project_key} AND issuetype=Bug ORDER BY key ASC",
            "fields": ISSUE_FIELDS,
            "startAt": start_at,
            "maxResults": page_size,
        }
        page = _get_with_retry(sess, url, params, headers, sleep)
        if cache_base is not None:
            (cache_base / f"page-{page_no}.json").write_text(
                json.dumps(page, sort_keys=True, indent=1), encoding="utf-8"
            )
        issues = page.get("issues", [])
        raw_issues.extend(issues)
        total = page.get("total", len(raw_issues))
        start_at += len(issues)
        page_no += 1
        if not issues or start_at >= total:
            break
    raw_issues.sort(key=lambda i: _issue_sort_key(i.get("key", "")))
    return raw_issues


def fetch_issues(
    endpoint: str,
    project_key: str,
    cache_dir: str | Path | None = None,
    **kwargs,
) -> list[Ticket]:
    """fetch_raw_issues plus normalization; see there for paging and retries."""
    raw = fetch_raw_issues(endpoint, project_key, cache_dir, **kwargs)
    return _normalize_issues(raw, endpoint)


def _issue_sort_key(key: str) -> tuple[str, int]:
    prefix, _, num = key.rpartition("-")
    return (prefix, int(num)) if num.isdigit() else (key, 0)


def _get_with_retry(sess, url, params, headers, sleep) -> dict:
    delay = 0.5
    for attempt in range(1, MAX_ATTEMPTS + 1):
        try:
            resp = sess.get(url, params=params, headers=headers, timeout=30)
            resp.raise_for_status()
            return resp.json()
        except (requests.RequestException, ValueError) as exc:
            if attempt == MAX_ATTEMPTS:
                raise InputError(
                    f"issue fetch failed after {MAX_ATTEMPTS} attempts: {exc}"
                ) from exc
            logger.warning("fetch attempt %d failed (%s); retrying", attempt, exc)
            sleep(delay)
            delay *= 2
    raise AssertionError("unreachable")


def load_issues(file: str | Path) -> list[Ticket]:
    """Load a JSON array of raw issue objects (the fetcher's cached shape)."""
    try:
        with open(file, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read issues file {file}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(
            f"issues file {file}: parse failure at line {exc.lineno}, column {exc.colno}"
        ) from exc
    if not isinstance(data, list):
        raise InputError(f"issues file {file}: expected a JSON array of issues")
    return _normalize_issues(data, str(file))


def load_cached_pages(cache_dir: str | Path, project_key: str) -> list[Ticket]:
    """Load the page cache written by fetch_issues; equals the direct fetch."""
    base = Path(cache_dir) / project_key / "issues"
    pages = sorted(base.glob("page-*.json"), key=lambda p: int(p.stem.split("-")[1]))
    if not pages:
        raise InputError(f"no cached issue pages under {base}")
    raw_issues: list[dict] = []
    for page_path in pages:
        page = json.loads(page_path.read_text(encoding="utf-8"))
        raw_issues.extend(page.get("issues", []))
    raw_issues.sort(key=lambda i: _issue_sort_key(i.get("key", "")))
    return _normalize_issues(raw_issues, str(base))


def canonical_version(name: str) -> str:
    """Trim surrounding whitespace and one leading 'v' before exact matching."""
    text = name.strip()
    if text[:1] in ("v", "V"):
        text = text[1:]
    return text


def resolve_versions(
    names: tuple[str, ...], releases: tuple[Release, ...]
) -> tuple[Release, ...]:
    """Match Jira version strings against the release table.

    Unmatched names are dropped with a warning; matches are returned in
    release order.
    """
    lookup = {canonical_version(r.name): r for r in releases}
    found: list[Release] = []
    for name in names:
        rel = lookup.get(canonical_version(name))
        if rel is None:
            logger.warning("version %r does not match any release; dropped", name)
        else:
            found.append(rel)
    return tuple(sorted(set(found), key=lambda r: r.ordinal))


def av_availability(
    tickets: list[Ticket], releases: tuple[Release, ...] | None = None
) -> float:
    """Fraction of resolved defect tickets carrying >=1 resolvable affected version."""
    resolved = [t for t in tickets if t.is_resolved]
    if not resolved:
        raise DegenerateDataError("no resolved defect tickets")
    if releases is None:
        with_av = sum(1 for t in resolved if t.affected_versions)
    else:
        with_av = sum(
            1 for t in resolved if resolve_versions(t.affected_versions, releases)
        )
    return with_av / len(resolved)
