"""
Invoke tasks for streamqoe.
"""

# pyright: reportMissingImports=false
try:
    from invoke import task
except ImportError as e:  # pragma: no cover
    raise RuntimeError(
        "Invoke is required to run these developer tasks. Install it with: pip install invoke"
    ) from e
import shutil
import sys
from pathlib import Path


@task(help={"coverage": "Report coverage of the streamqoe package"})
def test(c, coverage=False):
    """Run the test suite (pytest)."""
    root = Path(__file__).parent
    with c.cd(str(root)):
        # Install test deps if present (no-op if already installed)
        req_dev = root / "tests" / "requirements.txt"
        if req_dev.exists():
            c.run(f"{sys.executable} -m pip install -r tests/requirements.txt")
        cov = " --cov=streamqoe --cov-report=term-missing" if coverage else ""
        c.run(f"{sys.executable} -m pytest{cov}")


@task
def clean(c):
    """Remove local build artifacts (dist/, build/, *.egg-info/)."""
    root = Path(__file__).parent
    for p in [root / "dist", root / "build"]:
        if p.exists():
            shutil.rmtree(p, ignore_errors=True)
    for p in list(root.glob("*.egg-info")) + list((root / "src").glob("*.egg-info")):
        shutil.rmtree(p, ignore_errors=True)


@task(pre=[clean])
def build(c):
    """Build the pip distribution (sdist + wheel). Requires: `pip install build`."""
    root = Path(__file__).parent
    version_file = root / "VERSION"
    if not version_file.exists():
        raise FileNotFoundError("VERSION file not found")
    if not version_file.read_text(encoding="utf-8").strip():
        raise ValueError("VERSION file is empty")

    with c.cd(str(root)):
        c.run(f"{sys.executable} -m build")


@task(pre=[build])
def publish(c, repository="pypi"):
    """Publish the pip distribution using twine. Requires: `pip install twine`.

    Args:
        repository: Twine repository name (default: pypi). Common values: pypi, testpypi.
    """
    root = Path(__file__).parent
    with c.cd(str(root)):
        c.run(f"{sys.executable} -m twine upload --repository {repository} dist/*")
