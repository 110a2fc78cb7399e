import importlib
import inspect
import json
import logging
import pkgutil
from pathlib import Path
from typing import Dict, Iterable, List, Optional

logger = logging.getLogger(__name__)

BUNDLED_SCENARIOS_DIR = Path(__file__).resolve().parent / "scenarios"
MANIFEST_NAME = "manifest.json"


def discover_behaviors(base_paths: Iterable[str]) -> Dict[str, type]:
    """
    Discover all behavior classes in the specified packages.

    Args:
        base_paths: Dotted package paths to search for behaviors.

    Returns:
        dict: Behavior name (class name without the ``Behavior`` suffix)
        mapped to its class.
    """
    behaviors = {}

    for path in base_paths:
        try:
            package = importlib.import_module(path)
        except ImportError as e:
            logger.debug(f"Module {path} not found: {e}")
            continue

        try:
            for _, module_name, ispkg in pkgutil.walk_packages(package.__path__, package.__name__ + "."):
                if ispkg:
                    continue
                try:
                    module = importlib.import_module(module_name)
                except Exception as e:
                    logger.debug(f"Could not import module {module_name}: {e}")
                    continue
                for name, obj in inspect.getmembers(module, inspect.isclass):
                    if name.endswith("Behavior") and name != "Behavior" and obj.__module__ == module.__name__:
                        key = name[: -len("Behavior")]
                        behaviors[key] = obj
                        logger.debug(f"Discovered behavior: {name} -> {key}")
        except AttributeError:
            logger.debug(f"Path {path} is not a package")
            continue

    return behaviors


def discover_bundles(extra_dirs: Optional[Iterable[str]] = None) -> List[Dict]:
    """
    Read scenario manifests from the bundled directory and any extra directories.

    Each manifest entry gets its ``scenario`` and ``map`` paths resolved
    against the manifest's directory. Later directories override bundles
    with the same id.

    Returns:
        list: Manifest entries ordered by id.
    """
    entries: Dict[str, Dict] = {}
    for directory in [BUNDLED_SCENARIOS_DIR, *[Path(d) for d in extra_dirs or []]]:
        manifest = Path(directory) / MANIFEST_NAME
        if not manifest.exists():
            logger.debug(f"No manifest in {directory}")
            continue
        try:
            doc = json.loads(manifest.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            logger.warning(f"Skipping unreadable manifest {manifest}: {e}")
            continue
        for raw in doc.get("bundles", []):
            entry = dict(raw)
            entry["scenario_path"] = str(Path(directory) / entry["scenario"])
            entry["manifest"] = str(manifest)
            entries[str(entry["id"])] = entry
            logger.debug(f"Discovered bundle: {entry['id']} -> {entry['scenario_path']}")
    return [entries[key] for key in sorted(entries)]
