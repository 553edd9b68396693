"""
.. module:: dataio
   :platform: Unix, MacOSX
   :synopsis: dataset ingestion, key=value configuration, run manifests and
              text / csv / json rendering of results

"""
import io
import os
import csv
import json
import logging
import hashlib
import datetime
import dataclasses

from typing import Optional

import numpy as np

from . import __version__
from .estimation import CellState, FitResult, FrequencyTable, GridCell, GridResult, SeedTrace
from .exceptions import DataFormatError, DomainError, EmptyDataset
from .simulation import SimPlan

logger = logging.getLogger(__name__)

DATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'data')

# name -> (file, sha256)
BUNDLED_DATASETS = {
    'drosophila1': ('drosophila_run1.csv', '235399b3220c897e0b351b7d929d75297b5c5d396c9257857378567a879c75b7'),
    'drosophila2': ('drosophila_run2.csv', '574ef053949494adf6611c272060536ee6b454cd370fa68c9cb20398f6a405d7'),
}

FORMATS = ('text', 'csv', 'json')

UNDEFINED_CELL = "--"
NONCONVERGED_CELL = "nc"


def file_checksum(path):
    sha = hashlib.sha256()
    with open(path, 'rb') as fhandle:
        for block in iter(lambda: fhandle.read(1 << 16), b''):
            sha.update(block)
    return sha.hexdigest()


def _parse_int(text, path, line, what):
    try:
        return int(text.strip())
    except ValueError:
        raise DataFormatError("{} {!r} is not an integer".format(what, text.strip()), path, line)


def _data_rows(path):
    """(line number, fields) for non-blank, non-comment rows."""
    with open(path, 'r', encoding='utf-8', newline='') as fhandle:
        for number, row in enumerate(csv.reader(fhandle), start=1):
            if not row or not ''.join(row).strip() or row[0].lstrip().startswith('#'):
                continue
            yield number, [field.strip() for field in row]


def _is_header(fields):
    return any(f and not f.lstrip('+-').isdigit() and f[0].isalpha() for f in fields)


def ingest(path, fmt='auto'):
    """Read a frequency CSV ("x,count") or a raw sample (one value per line).

    A header row is optional; duplicate x rows are summed.

    Args:
        path (str): file to read.
        fmt (str): 'frequency', 'raw' or 'auto' (decided by the column count
            of the first data row).

    Raises:
        DataFormatError: malformed row, with its line number.
        EmptyDataset: no observation in the file.
    """
    if fmt not in ('auto', 'frequency', 'raw'):
        raise DomainError("unknown dataset format {!r}".format(fmt))
    pairs = []
    first = True
    for number, fields in _data_rows(path):
        if first and _is_header(fields):
            first = False
            continue
        if fmt == 'auto':
            fmt = 'frequency' if len(fields) >= 2 else 'raw'
        first = False
        expected = 2 if fmt == 'frequency' else 1
        if len(fields) != expected:
            raise DataFormatError("expected {} column(s), found {}".format(expected, len(fields)), path, number)
        x = _parse_int(fields[0], path, number, "value")
        count = _parse_int(fields[1], path, number, "count") if expected == 2 else 1
        if count < 0:
            raise DataFormatError("negative count {}".format(count), path, number)
        if x < 0:
            raise DataFormatError("negative support point {}".format(x), path, number)
        pairs.append((x, count))
    if not pairs or sum(c for _, c in pairs) == 0:
        raise EmptyDataset("{} holds no observation".format(path))
    table = FrequencyTable.from_pairs(pairs)
    logger.info("read %s: n=%d over %d support points", path, table.n, len(table.points))
    return table


def resolve_dataset(name_or_path):
    """Path of a bundled dataset name, verified against its pinned checksum, or the path itself."""
    if name_or_path in BUNDLED_DATASETS:
        filename, digest = BUNDLED_DATASETS[name_or_path]
        path = os.path.join(DATA_DIR, filename)
        if file_checksum(path) != digest:
            raise DataFormatError("checksum mismatch for bundled dataset {}".format(name_or_path), path)
        return path
    if not os.path.isfile(name_or_path):
        raise FileNotFoundError("no dataset file or bundled dataset named {!r}".format(name_or_path))
    return name_or_path


def load_dataset(name_or_path, fmt='auto', exclude=()):
    """(FrequencyTable, path) for a bundled name or a file, minus ``exclude`` points."""
    path = resolve_dataset(name_or_path)
    table = ingest(path, fmt)
    if exclude:
        table = table.exclude(exclude)
    return table, path


def load_config(path):
    """key=value lines into a dict; '#' starts a comment, '-' in keys reads as '_'."""
    values = {}
    with open(path, 'r', encoding='utf-8') as fhandle:
        for number, line in enumerate(fhandle, start=1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            if '=' not in line:
                raise DataFormatError("expected key=value", path, number)
            key, value = (part.strip() for part in line.split('=', 1))
            if not key:
                raise DataFormatError("empty key", path, number)
            values[key.replace('-', '_')] = value
    return values


PLAN_FIELDS = {
    'model': str,
    'theta_true': float,
    'n': int,
    'replicates': int,
    'alpha': float,
    'lambda': float,
    'epsilon': float,
    'location': int,
    'seed': int,
}
PLAN_REQUIRED = ('model', 'theta_true', 'n', 'replicates', 'alpha', 'lambda')


def parse_plan(source, overrides=None):
    """SimPlan from a key=value file (or a mapping); ``overrides`` win.

    Raises:
        DomainError: unknown or missing key, unparsable value, invalid plan.
    """
    try:
        raw = dict(source) if isinstance(source, dict) else load_config(source)
    except DataFormatError as err:
        raise DomainError("malformed plan: {}".format(err))
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = sorted(set(raw) - set(PLAN_FIELDS))
    if unknown:
        raise DomainError("unknown plan key(s): {}".format(", ".join(unknown)))
    missing = [k for k in PLAN_REQUIRED if k not in raw]
    if missing:
        raise DomainError("plan is missing: {}".format(", ".join(missing)))
    fields = {}
    for key, value in raw.items():
        try:
            fields[key] = PLAN_FIELDS[key](value)
        except (TypeError, ValueError):
            raise DomainError("plan value {}={!r} is not a valid {}".format(key, value, PLAN_FIELDS[key].__name__))
    fields['lam'] = fields.pop('lambda')
    return SimPlan(**fields)


@dataclasses.dataclass(frozen=True)
class RunManifest:
    command: str
    parameters: dict
    dataset_checksum: Optional[str] = None
    version: str = __version__
    timestamp: Optional[str] = None

    def to_dict(self):
        out = {'command': self.command, 'parameters': self.parameters,
               'dataset_checksum': self.dataset_checksum, 'version': self.version}
        if self.timestamp is not None:
            out['timestamp'] = self.timestamp
        return out


def manifest_timestamp():
    """UTC ISO timestamp, fixed by SOURCE_DATE_EPOCH when it is set."""
    epoch = os.environ.get('SOURCE_DATE_EPOCH')
    if epoch:
        moment = datetime.datetime.fromtimestamp(int(epoch), tz=datetime.timezone.utc)
    else:
        moment = datetime.datetime.now(tz=datetime.timezone.utc).replace(microsecond=0)
    return moment.isoformat()


def make_manifest(command, parameters, dataset_path=None, timestamp=True):
    checksum = file_checksum(dataset_path) if dataset_path else None
    return RunManifest(command, dict(parameters), checksum,
                       timestamp=manifest_timestamp() if timestamp else None)

# -- rendering ---------------------------------------------------------------


def _fmt(value, digits):
    if value is None:
        return ""
    return "{:.{}f}".format(value, digits)


def _csv_text(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator='\n')
    writer.writerows(rows)
    return buf.getvalue()


def _json_text(payload):
    return json.dumps(_plain(payload), indent=2, allow_nan=False) + '\n'


def _manifest_comment(manifest):
    if manifest is None:
        return ""
    return ''.join("# {}: {}\n".format(k, json.dumps(v)) for k, v in manifest.to_dict().items())


TRACE_FLOATS = ('seed', 'theta', 'objective', 'grad_norm')


def _float_out(value):
    # strict json has no inf or nan; float() reads these spellings back
    value = float(value)
    return value if np.isfinite(value) else str(value)


def trace_to_dict(trace):
    record = dataclasses.asdict(trace)
    for key in TRACE_FLOATS:
        record[key] = _float_out(record[key])
    record['iterations'] = int(record['iterations'])
    record['converged'] = bool(record['converged'])
    return record


def trace_from_dict(data):
    fields = dict(data)
    for key in TRACE_FLOATS:
        fields[key] = float(fields[key])
    return SeedTrace(**fields)


def fit_to_dict(fit):
    return {
        'theta_hat': fit.theta_hat,
        'objective': fit.objective,
        'grad_norm': fit.grad_norm,
        'iterations': fit.iterations,
        'seeds_tried': fit.seeds_tried,
        'converged': fit.converged,
        'std_error': fit.std_error,
        'model': fit.model,
        'alpha': fit.alpha,
        'lambda': fit.lam,
        'trace': [trace_to_dict(t) for t in fit.trace],
    }


def fit_from_dict(data):
    fields = dict(data)
    fields['lam'] = fields.pop('lambda')
    fields['trace'] = [trace_from_dict(t) for t in fields.get('trace', ())]
    return FitResult(**fields)


def render_fit(fit, manifest=None, fmt='text', digits=4):
    if fmt == 'json':
        return _json_text({'manifest': manifest.to_dict() if manifest else None, 'fit': fit_to_dict(fit)})
    if fmt == 'csv':
        record = {k: v for k, v in fit_to_dict(fit).items() if k != 'trace'}
        return _manifest_comment(manifest) + _csv_text([list(record), [repr(v) if isinstance(v, float) else v
                                                                       for v in record.values()]])
    lines = [
        "model       {}".format(fit.model),
        "alpha       {:g}".format(fit.alpha),
        "lambda      {:g}".format(fit.lam),
        "theta_hat   {}".format(_fmt(fit.theta_hat, digits)),
        "std_error   {}".format(_fmt(fit.std_error, digits) or "n/a"),
        "objective   {:.10g}".format(fit.objective),
        "grad_norm   {:.3g}".format(fit.grad_norm),
        "iterations  {}".format(fit.iterations),
        "seeds       {}".format(fit.seeds_tried),
    ]
    return _manifest_comment(manifest) + '\n'.join(lines) + '\n'


def render_undefined(params, reason, manifest=None, fmt='text'):
    """Output for a fit that has no estimate ("--")."""
    if fmt == 'json':
        return _json_text({'manifest': manifest.to_dict() if manifest else None,
                           'fit': None, 'alpha': params.alpha, 'lambda': params.lam, 'reason': reason})
    if fmt == 'csv':
        return _manifest_comment(manifest) + _csv_text([['alpha', 'lambda', 'theta_hat', 'reason'],
                                                        [repr(params.alpha), repr(params.lam), UNDEFINED_CELL, reason]])
    return _manifest_comment(manifest) + "theta_hat   {}\nreason      {}\n".format(UNDEFINED_CELL, reason)


def _cell_text(cell, digits):
    if cell.state is CellState.INADMISSIBLE:
        return UNDEFINED_CELL
    if cell.state is CellState.NONCONVERGENCE:
        return NONCONVERGED_CELL
    return _fmt(cell.fit.theta_hat, digits)


def grid_to_dict(grid):
    return {
        'model': grid.model,
        'lambdas': list(grid.lambdas),
        'alphas': list(grid.alphas),
        'cells': [[{'lambda': c.lam, 'alpha': c.alpha, 'state': c.state.value,
                    'fit': fit_to_dict(c.fit) if c.fit is not None else None,
                    'message': c.message} for c in row] for row in grid.cells],
    }


def grid_from_json(text):
    """GridResult back from :func:`render_grid` json output."""
    payload = json.loads(text)
    data = payload.get('grid', payload)
    cells = [[GridCell(c['lambda'], c['alpha'], CellState(c['state']),
                       fit_from_dict(c['fit']) if c['fit'] is not None else None, c['message'])
              for c in row] for row in data['cells']]
    return GridResult(data['model'], tuple(data['lambdas']), tuple(data['alphas']), cells)


def render_grid(grid, manifest=None, fmt='text', digits=2):
    """Rows are lambdas, columns alphas; "--" inadmissible, "nc" not converged."""
    if fmt == 'json':
        return _json_text({'manifest': manifest.to_dict() if manifest else None, 'grid': grid_to_dict(grid)})
    if fmt == 'csv':
        rows = [['lambda', 'alpha', 'state', 'theta_hat', 'objective']]
        for row in grid.cells:
            for c in row:
                rows.append([repr(c.lam), repr(c.alpha), c.state.value,
                             repr(c.fit.theta_hat) if c.fit else '', repr(c.fit.objective) if c.fit else ''])
        return _manifest_comment(manifest) + _csv_text(rows)
    width = max(digits + 4, 7)
    header = "{:>8}".format("lambda") + ''.join("{:>{}}".format("a={:g}".format(a), width) for a in grid.alphas)
    lines = [header]
    for lam, row in zip(grid.lambdas, grid.cells):
        lines.append("{:>8g}".format(lam) + ''.join("{:>{}}".format(_cell_text(c, digits), width) for c in row))
    return _manifest_comment(manifest) + '\n'.join(lines) + '\n'


def render_are(model_name, thetas, alphas, table, manifest=None, fmt='text', digits=2):
    if fmt == 'json':
        return _json_text({'manifest': manifest.to_dict() if manifest else None, 'model': model_name,
                           'thetas': list(thetas), 'alphas': list(alphas), 'are': table})
    if fmt == 'csv':
        rows = [['theta'] + [repr(a) for a in alphas]]
        rows += [[repr(t)] + [repr(v) for v in row] for t, row in zip(thetas, table)]
        return _manifest_comment(manifest) + _csv_text(rows)
    width = digits + 6
    lines = ["{:>8}".format("theta") + ''.join("{:>{}}".format("a={:g}".format(a), width) for a in alphas)]
    for theta, row in zip(thetas, table):
        lines.append("{:>8g}".format(theta) + ''.join("{:>{}}".format(_fmt(v, digits), width) for v in row))
    return _manifest_comment(manifest) + '\n'.join(lines) + '\n'


def plan_to_dict(plan):
    fields = dataclasses.asdict(plan)
    fields['lambda'] = fields.pop('lam')
    return fields


def report_to_dict(report):
    return {
        'plan': plan_to_dict(report.plan),
        'replicates': report.replicates,
        'successes': report.successes,
        'inadmissible': report.inadmissible,
        'nonconvergence': report.nonconvergence,
        'failure_count': report.failure_count,
        'mean_theta_hat': report.mean_theta_hat,
        'sd_theta_hat': report.sd_theta_hat,
        'empirical_var_scaled': report.empirical_var_scaled,
        'theoretical_sandwich': report.theoretical_sandwich,
        'theta_target': report.theta_target,
        'variance_ratio': report.variance_ratio,
        'normality_stat': report.normality_stat,
        'normality_pvalue': report.normality_pvalue,
        'normality_pass': report.normality_pass,
    }


def _plain(value):
    # strict json has no NaN or inf; sd of a single replicate is reported as null
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def render_report(report, manifest=None, fmt='text'):
    record = _plain(report_to_dict(report))
    if fmt == 'json':
        return _json_text({'manifest': manifest.to_dict() if manifest else None, 'report': record})
    flat = {k: v for k, v in record.items() if k != 'plan'}
    if fmt == 'csv':
        return _manifest_comment(manifest) + _csv_text([list(flat), ['' if v is None else v for v in flat.values()]])
    lines = ["{:<22}{}".format(k, 'n/a' if v is None else v) for k, v in flat.items()]
    return _manifest_comment(manifest) + '\n'.join(lines) + '\n'


def render_verdict(verdict, manifest=None, fmt='text'):
    record = _plain({
        'lambdas': list(verdict.lambdas),
        'variances': list(verdict.variances),
        'means': list(verdict.means),
        'max_difference': verdict.max_difference,
        'noise_band': verdict.noise_band if np.isfinite(verdict.noise_band) else None,
        'agree': verdict.agree,
    })
    if fmt == 'json':
        return _json_text({'manifest': manifest.to_dict() if manifest else None, 'verdict': record})
    if fmt == 'csv':
        rows = [['lambda', 'empirical_var_scaled', 'mean_theta_hat']]
        rows += [[repr(lam), repr(v), repr(m)] for lam, v, m in zip(verdict.lambdas, verdict.variances, verdict.means)]
        return _manifest_comment(manifest) + _csv_text(rows)
    lines = ["{:>8}{:>16}{:>16}".format("lambda", "var", "mean")]
    lines += ["{:>8g}{:>16.6f}{:>16.6f}".format(lam, v, m)
              for lam, v, m in zip(verdict.lambdas, verdict.variances, verdict.means)]
    lines.append("max difference {:.6f}, noise band {}, {}".format(
        verdict.max_difference, 'n/a' if record['noise_band'] is None else "{:.6f}".format(verdict.noise_band),
        "agree" if verdict.agree else "DISAGREE"))
    return _manifest_comment(manifest) + '\n'.join(lines) + '\n'
