import json
from pathlib import Path


def get_schema() -> dict:
    """Get experiment config schema"""
    return _load("config_schema.json")


def get_model_schema() -> dict:
    """Get model file schema"""
    return _load("model_schema.json")


def _load(file_name: str) -> dict:
    curr_dir = Path(__file__).parent
    with open(curr_dir / file_name, "r") as f:
        schema = json.load(f)
        assert isinstance(schema, dict)
        return schema
