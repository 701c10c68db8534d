"""
Suite Loader for cqms

Loads experiment suites from Python files. Each suite file defines a SuiteBase
subclass and names it with a module-level `suite_instance = <Class>` marker.
"""

import importlib.util
import sys
from pathlib import Path
from types import ModuleType
from typing import Dict, List, Optional, Union

from cqms_logger import get_logger
from cqms_suite_base import SuiteBase

BUILTIN_SUITES_DIR = Path(__file__).resolve().parent / "suites"
MODULE_PREFIX = "cqms_suite_"


class SuiteLoader:
    """
    Handles loading and managing experiment suites.
    """

    def __init__(self, directory: Union[str, Path] = BUILTIN_SUITES_DIR):
        self.logger = get_logger("suite_loader")
        self.directory = Path(directory)
        self.loaded_modules: Dict[str, ModuleType] = {}

    def load_suite(self, filepath: Union[str, Path]) -> Optional[SuiteBase]:
        """
        Load a suite from a Python file.

        Args:
            filepath: Path to the suite file

        Returns:
            Initialized suite instance or None if loading failed
        """
        suite_path = Path(filepath)
        if not suite_path.exists():
            self.logger.error(f"Suite file does not exist: {filepath}")
            return None
        if suite_path.suffix != ".py":
            self.logger.error(f"Suite file must be a Python file: {filepath}")
            return None

        module_name = MODULE_PREFIX + suite_path.stem
        try:
            spec = importlib.util.spec_from_file_location(module_name, suite_path)
            if spec is None or spec.loader is None:
                self.logger.error(f"Could not create module spec for: {filepath}")
                return None
            module = importlib.util.module_from_spec(spec)
            sys.modules[module_name] = module
            self.loaded_modules[module_name] = module
            spec.loader.exec_module(module)
        except Exception as e:
            self.logger.error(f"Failed to import suite {filepath}: {e}")
            self.unload_suite(module_name)
            return None

        suite_class = self._find_suite_class(module)
        if suite_class is None:
            self.logger.error(f"No suite class found in: {filepath}")
            return None
        suite = suite_class()
        if not self.validate_suite(suite):
            return None
        if not suite.initialize():
            self.logger.error(f"Suite {suite.name} failed to initialize")
            return None
        self.logger.debug(f"Loaded suite: {suite.name} v{suite.version}")
        return suite

    def load_builtin(self, name: str) -> Optional[SuiteBase]:
        """Load the suite file <name>.py from the loader's directory."""
        return self.load_suite(self.directory / f"{name}.py")

    def _find_suite_class(self, module: ModuleType) -> Optional[type]:
        """
        Find the suite class in a module: the `suite_instance` marker if
        present, otherwise the first SuiteBase subclass defined there.
        """
        marker = getattr(module, "suite_instance", None)
        if isinstance(marker, type) and issubclass(marker, SuiteBase):
            return marker
        for name in dir(module):
            obj = getattr(module, name)
            if (isinstance(obj, type) and issubclass(obj, SuiteBase) and obj is not SuiteBase
                    and obj.__module__ == module.__name__):
                return obj
        return None

    def unload_suite(self, module_name: str) -> bool:
        """
        Unload a suite module.

        Args:
            module_name: Name of the module to unload

        Returns:
            True if unloaded successfully
        """
        if module_name not in self.loaded_modules:
            self.logger.warning(f"Module not found for unloading: {module_name}")
            return False
        del self.loaded_modules[module_name]
        sys.modules.pop(module_name, None)
        self.logger.debug(f"Unloaded suite module: {module_name}")
        return True

    def validate_suite(self, suite: SuiteBase) -> bool:
        """
        Validate that a suite meets the requirements.

        Returns:
            True if the suite is valid
        """
        try:
            info = suite.get_suite_info()
        except Exception as e:
            self.logger.error(f"Error reading suite info: {e}")
            return False
        for key in ("name", "version", "description"):
            if not info.get(key):
                self.logger.error(f"Suite missing required '{key}' property")
                return False
        for method in ("initialize", "shutdown", "execute", "run"):
            if not callable(getattr(suite, method, None)):
                self.logger.error(f"Suite missing required method: {method}")
                return False
        return True

    def discover_suites(self, directory: Optional[Union[str, Path]] = None) -> List[str]:
        """
        Discover suite files in a directory.

        Returns:
            Sorted list of suite file paths; files starting with "_" are skipped
        """
        suite_dir = Path(directory) if directory is not None else self.directory
        if not suite_dir.exists():
            self.logger.warning(f"Suite directory does not exist: {suite_dir}")
            return []
        files = sorted(str(p) for p in suite_dir.glob("*.py") if not p.name.startswith("_"))
        self.logger.debug(f"Discovered {len(files)} suite files in {suite_dir}")
        return files
