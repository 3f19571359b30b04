"""
Script to check if all required dependencies for the interval tuner are installed.
"""

import sys
import importlib
import pkg_resources

# import name -> distribution name, where they differ
DISTRIBUTIONS = {"sklearn": "scikit-learn"}


def check_package(package_name, min_version=None):
    """
    Check if a package is installed and meets the minimum version requirement.

    Parameters
    ----------
    package_name : str
        Import name of the package to check.
    min_version : str, optional
        Minimum version required. If None, only checks if the package is installed.

    Returns
    -------
    bool
        True if the package is installed and meets the version requirement, False otherwise.
    """
    try:
        importlib.import_module(package_name)
    except ImportError:
        print(f"❌ {package_name} is not installed")
        return False

    try:
        installed_version = pkg_resources.get_distribution(
            DISTRIBUTIONS.get(package_name, package_name)
        ).version
    except pkg_resources.DistributionNotFound:
        print(f"⚠️ Warning: Could not determine version for {package_name}")
        return True

    if min_version and pkg_resources.parse_version(installed_version) < pkg_resources.parse_version(min_version):
        print(f"❌ {package_name} version {installed_version} is installed, but version {min_version} or higher is required")
        return False
    print(f"✅ {package_name} version {installed_version} is installed (minimum required: {min_version})")
    return True


def check_interval_tuner():
    """
    Check if every module of the interval_tuner package can be imported.

    Returns
    -------
    bool
        True if all modules can be imported, False otherwise.
    """
    try:
        import interval_tuner
    except ImportError:
        print("❌ interval_tuner package is not installed or not in the Python path")
        return False
    print(f"✅ interval_tuner package version {interval_tuner.__version__} is installed")

    modules_to_check = [
        "interval_tuner.errors",
        "interval_tuner.data_model",
        "interval_tuner.forest",
        "interval_tuner.metrics",
        "interval_tuner.stats",
        "interval_tuner.validation",
        "interval_tuner.tuning",
        "interval_tuner.meta",
        "interval_tuner.reports",
        "interval_tuner.main",
    ]

    all_modules_ok = True
    for module in modules_to_check:
        try:
            importlib.import_module(module)
            print(f"  ✅ {module} can be imported")
        except ImportError as e:
            print(f"  ❌ {module} cannot be imported: {str(e)}")
            all_modules_ok = False
    return all_modules_ok


def main():
    """
    Check all required dependencies for the interval tuner.
    """
    print("Checking Python version...")
    python_version = sys.version.split()[0]
    if pkg_resources.parse_version(python_version) < pkg_resources.parse_version("3.9"):
        print(f"❌ Python version {python_version} is installed, but version 3.9 or higher is required")
    else:
        print(f"✅ Python version {python_version} is installed")

    print("\nChecking required packages...")
    required_packages = {
        "numpy": "1.23.0",
        "scipy": "1.9.0",
        "pandas": "1.5.0",
        "joblib": "1.2.0",
        "sklearn": "1.3.0",
        "pytest": "7.0.0",
    }

    all_packages_ok = True
    for package, min_version in required_packages.items():
        if not check_package(package, min_version):
            all_packages_ok = False

    print("\nChecking interval_tuner package...")
    interval_tuner_ok = check_interval_tuner()

    print("\nSummary:")
    if all_packages_ok and interval_tuner_ok:
        print("✅ All dependencies are correctly installed!")
        return 0
    print("❌ Some dependencies are missing or have incorrect versions.")
    print("Please install the required dependencies using:")
    print("pip install -r requirements.txt")
    return 1


if __name__ == "__main__":
    sys.exit(main())
