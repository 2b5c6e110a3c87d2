import os
import shutil

import pytest


@pytest.fixture(scope="session")
def cli():
    path = os.environ.get("HYBRIDRANK_CLI") or shutil.which("hybridrank")
    if not path:
        pytest.skip("hybridrank CLI not built")
    return path
