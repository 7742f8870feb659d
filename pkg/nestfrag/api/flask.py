from flask import Flask, jsonify, request

import logging

import nestfrag.globals as globals
from nestfrag.errors import NestFragError
from nestfrag.utils.mass_partitions.mass_partitions import FragmentationParams
from nestfrag.utils.partitions.partitions import enumerate_nested, format_nested, parse_nested
from nestfrag.utils.rates.rates import generator_row, row_to_dict
from nestfrag.utils.simulator.simulator import run

app = Flask(__name__)
logger = logging.getLogger(__name__)


@app.errorhandler(NestFragError)
def handle_error(e):
    logger.warning("request failed: %s", e)
    return jsonify(e.to_dict()), 400


def _body():
    data = request.get_json(silent=True)
    if not isinstance(data, dict):
        raise NestFragError("PARSE", "request body must be a JSON object")
    return data


def _number(value, name):
    try:
        return float(value)
    except (TypeError, ValueError):
        raise NestFragError("PARSE", f"{name} must be a number, got {value!r}")


def _int(value, name):
    try:
        return int(value)
    except (TypeError, ValueError):
        raise NestFragError("PARSE", f"{name} must be an integer, got {value!r}")


@app.route('/api/rates', methods=['POST'])
def rates():
    data = _body()
    params = FragmentationParams.from_dict(data.get("params", {}))
    state = parse_nested(str(data.get("state", "")))
    return jsonify(row_to_dict(state, generator_row(state, params)))


@app.route('/api/simulate', methods=['POST'])
def simulate():
    data = _body()
    params = FragmentationParams.from_dict(data.get("params", {}))
    n = _int(data.get("n"), "n")
    horizon = data.get("horizon")
    max_events = data.get("max_events")
    trajectory = run(
        params,
        n,
        initial=parse_nested(data["initial"]) if data.get("initial") else None,
        horizon=_number(horizon, "horizon") if horizon is not None else None,
        max_events=_int(max_events, "max_events") if max_events is not None else None,
        seed=_int(data.get("seed", 0), "seed"),
        run_config={"command": "api/simulate"},
    )
    return jsonify({
        "header": trajectory.header(),
        "events": [event.to_dict() for event in trajectory.events],
    })


@app.route('/api/enumerate', methods=['GET'])
def enumerate_states():
    n = _int(request.args.get("n"), "n")
    if n < 1:
        raise NestFragError("BAD_RANGE", "n must be positive")
    states = enumerate_nested(n, cap=globals.CONFIG['nested_cap'])
    return jsonify({"n": n, "count": len(states), "states": [format_nested(s) for s in states]})
