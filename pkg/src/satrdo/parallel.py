import os
from concurrent.futures import ThreadPoolExecutor


def resolve_jobs(jobs=None):
    """Worker count: explicit value, else ``SATRDO_JOBS``, else CPU count."""
    if jobs is None:
        env = os.environ.get("SATRDO_JOBS")
        jobs = int(env) if env else (os.cpu_count() or 1)
    jobs = int(jobs)
    if jobs < 1:
        raise ValueError(f"jobs must be >= 1, got {jobs}")
    return jobs


def map_ordered(fn, items, jobs=1):
    """``list(map(fn, items))`` on a thread pool; output order is input order."""
    items = list(items)
    jobs = resolve_jobs(jobs)
    if jobs == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))
