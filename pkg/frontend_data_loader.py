# frontend_data_loader.py
import io
from typing import Optional, Union

import pandas as pd

from backend_errors import ConfigError
from backend_param_config import ConfigDocument, SimParams, parse_config_document


def default_document() -> ConfigDocument:
    """Parameters used when no params file is uploaded."""
    return ConfigDocument(params=SimParams().validate(), sweep={})


def load_params_upload(data: Optional[Union[bytes, str]]) -> tuple[ConfigDocument, Optional[str]]:
    """
    Read an uploaded params file.
    Returns (document, error). On any problem the defaults come back together
    with the message, so the page keeps working.
    """
    if not data:
        return default_document(), None
    try:
        text = data.decode("utf-8") if isinstance(data, bytes) else data
        return parse_config_document(text), None
    except UnicodeDecodeError:
        return default_document(), "Params file is not UTF-8 text; using defaults."
    except ConfigError as exc:
        return default_document(), f"Params file rejected ({exc}); using defaults."


def load_results_csv(data: Union[bytes, str]) -> tuple[pd.DataFrame, Optional[str]]:
    """
    Re-open a downloaded summary or raw CSV; `#` meta lines are skipped.
    Returns (table, error); the table is empty when the file cannot be read.
    """
    try:
        if isinstance(data, bytes):
            data = data.decode("utf-8")
        df = pd.read_csv(io.StringIO(data), comment="#")
    except UnicodeDecodeError:
        return pd.DataFrame(), "Results file is not UTF-8 text."
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as exc:
        return pd.DataFrame(), f"Results file could not be read ({exc})."
    return df, None
