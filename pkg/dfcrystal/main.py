#!/usr/bin/env python3
# main.py
"""# Dirac-Fock crystal toolbox dfcrystal

**dfcrystal** discretizes the periodic Dirac-Fock model of a cubic
crystal in a plane-wave spinor basis, minimizes the penalized energy
by a damped self-consistent iteration projected back onto the
constrained set (retraction), and checks the structural properties
of the minimizer through diagnostics.

Commands:
(1) **solve**
	Runs the SCF and writes the solution, the checkpoint of the
    density matrix, the SCF history and the Fermi-shell report.
(2) **check**
	Estimates the constants and reports the coupling assumptions.
(3) **expansion**, **scaling**, **bands**, **contraction**
	Runs a diagnostic on a checkpointed (or freshly solved) state.

Diagnostics are plugins of 'dfcrystal.diagnostics'; every plugin
declares its own parameters, which are accepted in the 'run' block
of the configuration.

## Minimal version of the configuration:
```json
{
	"_version": 1,
	"model": {
		"ell": 6.283185307179586,
		"z": 1.0,
		"q": 2,
		"alpha": 0.05,
		"c": 10.0,
		"k_cut": 1,
		"n_xi": 2
	},
	"mode": "permissive",
	"seed": 0,
	"logging_verbosity": 1
}
```
"""
######################
# Imports & Globals
######################

import sys, os, json, time

from dataclasses import dataclass, field, replace

import dfcrystal

import dfcrystal.diagnostics as diagnostics
import dfcrystal.log as log

from dfcrystal.errors import DFCrystalError, CheckpointError, CheckpointMissing, AssumptionViolated, PropertyViolated
from dfcrystal.errors import HypothesisViolated, EmptyBall, MaxIterations, NonContraction, NoDescent
from dfcrystal.model import ModelParams, P as P_MODEL
from dfcrystal.constants import ConstantsEstimate, constantsEstimate, assumptionsCheck, P as P_CONSTANTS
from dfcrystal.operators import Context, contextBuild, threadsSet, meanField, spectraCompute, spectralGapCheck
from dfcrystal.states import BlochDensityMatrix
from dfcrystal.solver import Solution, scfSolve, freeReferenceEnergy
from dfcrystal.checkpoint import gammaSave, gammaLoad, reportSave, csvSave, canonicalJson

# Typing
from typing import Dict, Tuple


CONFIGURATION_VERSION = 1

COMMANDS = ["solve", "check", "expansion", "scaling", "bands", "contraction"]

CHECKPOINT_NAME = "gamma.ckpt.json"


# Parameters
from dfcrystal.parameter import *
P = ParameterList()
P.createAdd("_version", None, int, "Version of the configuration.", "General", choices=[CONFIGURATION_VERSION])
P.createAdd("_comment", None, str, "Commentary of the configuration file.", "General")
P.createAdd("model", {}, dict, "Model parameters (see 'model').", "General")
P.createAdd("constants", {}, dict, "Overrides of the estimated constants (see 'constants').", "General")
P.createAdd("run", {}, dict, "Options of the selected command (see 'run').", "General")
P.createAdd("output", {}, dict, "Output settings (see 'output').", "General")
P.createAdd("mode", "permissive", str, "'strict' turns failed assumptions and properties into errors.", "General", choices=["strict", "permissive"])
P.createAdd("seed", 0, int, "Seed of the probe generator.", "General", bounds=(0, 2**32 - 1))
P.createAdd("threads", 1, int, "Number of worker threads over fibers.", "Utility", bounds=(1, 1024))
P.createAdd("logging_verbosity", 1, int, "Index to the verbosity of used logger.", "Utility", bounds=(0, 3))

P_OUTPUT = ParameterList()
P_OUTPUT.createAdd("directory", ".", str, "Directory receiving all outputs and 'run.log'.", "output")
P_OUTPUT.createAdd("csv", True, bool, "Write the CSV curve data next to the JSON reports.", "output")
P_OUTPUT.createAdd("checkpoint_every", 0, int, "Write the checkpoint every n SCF iterations, 0 only at the end.", "output", bounds=(0, 10**6))

P_SOLVE = ParameterList()
P_SOLVE.createAdd("initial", "free-fill", str, "Initial guess: 'free-fill', 'atomic-guess' or 'checkpoint'.", "run", choices=["free-fill", "atomic-guess", "checkpoint"])
P_SOLVE.createAdd("checkpoint", "", str, "Checkpoint read by initial = 'checkpoint', empty selects the output directory.", "run")
P_SOLVE.createAdd("eps_sweep", [], list, "Margins eps of eps_P solved again for the sensitivity sweep.", "run")

P_CHECK = ParameterList()

P_DIAGNOSTIC = ParameterList()
P_DIAGNOSTIC.createAdd("checkpoint", "", str, "Checkpoint of the state, empty selects the output directory.", "run")
P_DIAGNOSTIC.createAdd("require_checkpoint", False, bool, "Fail when the checkpoint is missing instead of solving first.", "run")
P_DIAGNOSTIC.createAdd("initial", "free-fill", str, "Initial guess of the solve preceding a diagnostic.", "run", choices=["free-fill", "atomic-guess"])


# Exit codes, first matching class wins
EXIT_CODES = [
    (CheckpointMissing, 11),
    (CheckpointError, 12),
    (AssumptionViolated, 3),
    (PropertyViolated, 4),
    (HypothesisViolated, 4),
    (EmptyBall, 12),
    (MaxIterations, 2),
    (NonContraction, 2),
    (NoDescent, 2),
    (DFCrystalError, 2),
    (ValueError, 12),
    (OSError, 10),
]


######################
# RunConfig
######################

@dataclass
class RunConfig:
    """Validated configuration of a single command."""

    command: str
    model: ModelParams
    constants: Dict[str, float]
    probes: int
    run: Dict[str, any]
    output: Dict[str, any]
    mode: str = "permissive"
    seed: int = 0
    threads: int = 1
    logging_verbosity: int = 1
    effective: Dict[str, any] = field(default_factory = dict)


    @property
    def strict(self) -> bool:
        return self.mode == "strict"

    @property
    def directory(self) -> str:
        return self.output.get("directory")

    def path(self, name: str) -> str:
        return os.path.join(self.directory, name)


######################
# Configuration
######################

def parametersMerge(*lists: ParameterList) -> ParameterList:
    """Joins parameter lists, later lists override earlier ones."""

    _merged = ParameterList()

    for _list in lists:
        for _name, _parameter in _list.iterate():
            _merged.add(_parameter)

    return _merged


def runParameters(command: str) -> ParameterList:
    """Parameters accepted in the 'run' block of 'command'."""

    if command == "solve":
        return P_SOLVE

    if command == "check":
        return P_CHECK

    if command in COMMANDS:
        return parametersMerge(P_DIAGNOSTIC, getattr(diagnostics, command).main.P)

    raise ValueError("Unknown command '%s', expected one of %s." % (command, ", ".join(COMMANDS)))


def configurationLoad(filename: str) -> Dict[str, any]:
    """Loads a configuration stored in 'filename'.

    Arguments:
    filename -- name of the file along with its path, str

    Returns:
    conf -- parsed configuration, dict

    Raises:
    OSError -- when the file cannot be read
    ValueError -- when the file is not a JSON object
    """

    with open(filename, "r") as configuration_file:
        try:
            conf = json.load(configuration_file)
        except json.JSONDecodeError as e:
            raise ValueError("Configuration '%s' is not valid JSON: %s" % (filename, str(e)))

    if not isinstance(conf, dict):
        raise ValueError("Configuration '%s' has to be a JSON object." % filename)

    return conf


def configurationValidate(conf: Dict[str, any], command: str, out: str = None, mode: str = None,
        threads: int = None, seed: int = None) -> RunConfig:
    """Validates a configuration for 'command'.

    Command-line values (when not None) override the configuration.

    Arguments:
    conf -- loaded configuration, dict
    command -- one of COMMANDS, str
    out -- output directory, str, default None
    mode -- 'strict' or 'permissive', str, default None
    threads -- number of worker threads, int, default None
    seed -- seed of the probe generator, int, default None

    Returns:
    config -- validated configuration, RunConfig

    Raises:
    ValueError -- naming the offending field
    """

    if "_version" not in conf:
        raise ValueError("Configuration requires '_version' (current version is %d)." % CONFIGURATION_VERSION)

    _run_parameters = runParameters(command)

    _top = P.validate(conf, "configuration")

    for _name, _value in [("mode", mode), ("threads", threads), ("seed", seed)]:
        if _value is not None:
            _top[_name] = P.get(_name).check(_value)

    _model = ModelParams.fromDict(_top["model"] or {})

    _constants_block = _top["constants"] or {}
    _constants = P_CONSTANTS.validate(_constants_block, "constants")
    _overrides = { _name: _constants[_name] for _name in _constants_block if _name != "probes" and _constants[_name] is not None }

    _run = _run_parameters.validate(_top["run"] or {}, "run")

    _output = P_OUTPUT.validate(_top["output"] or {}, "output")

    if out is not None:
        _output["directory"] = P_OUTPUT.get("directory").check(out)

    _effective = {
        "_version": CONFIGURATION_VERSION,
        "command": command,
        "model": _model.dict(),
        "constants": {**_overrides, "probes": _constants["probes"]},
        "run": _run,
        "output": _output,
        "mode": _top["mode"],
        "seed": _top["seed"],
        "threads": _top["threads"],
        "logging_verbosity": _top["logging_verbosity"],
    }

    return RunConfig(
        command = command,
        model = _model,
        constants = _overrides,
        probes = _constants["probes"],
        run = _run,
        output = _output,
        mode = _top["mode"],
        seed = _top["seed"],
        threads = _top["threads"],
        logging_verbosity = _top["logging_verbosity"],
        effective = _effective,
    )


def documentationGenerate() -> str:
    """Markdown description of every parameter list."""

    _sections = [
        P.markdown("Configuration"),
        P_MODEL.markdown("model"),
        P_CONSTANTS.markdown("constants"),
        P_OUTPUT.markdown("output"),
        P_SOLVE.markdown("run (solve)"),
        P_DIAGNOSTIC.markdown("run (diagnostics, common)"),
    ]

    for _name in sorted(diagnostics.__all__):
        if _name in COMMANDS:
            _sections.append(getattr(diagnostics, _name).main.P.markdown("run (%s)" % _name))

    return "\n".join(_sections)


######################
# Shared steps
######################

def contextPrepare(config: RunConfig, strict: bool = None) -> Tuple[Context, ConstantsEstimate]:
    """Builds the operator context and the constants of a run."""

    threadsSet(config.threads)

    _context = contextBuild(config.model)
    _constants = constantsEstimate(
        _context,
        seed = config.seed,
        probes = config.probes,
        overrides = config.constants,
        strict = config.strict if strict is None else strict,
    )

    return _context, _constants


def checkpointPath(config: RunConfig) -> str:
    return config.run.get("checkpoint") or config.path(CHECKPOINT_NAME)


def checkpointLoad(config: RunConfig) -> BlochDensityMatrix:
    """Loads the checkpoint of the run.

    Raises:
    CheckpointMissing -- when the file does not exist
    CheckpointError -- when it does not match the model
    """

    _path = checkpointPath(config)

    try:
        _gamma = gammaLoad(_path, config.model)
    except FileNotFoundError:
        raise CheckpointMissing("Checkpoint '%s' does not exist." % _path)

    log.log("checkpoint:loaded path:%s ranks:%s" % (_path, _gamma.ranks), 1)

    return _gamma


def stateObtain(config: RunConfig, context: Context, constants: ConstantsEstimate) -> BlochDensityMatrix:
    """State for a diagnostic: the checkpoint, or a fresh solve when allowed."""

    _path = checkpointPath(config)

    if os.path.exists(_path) or config.run.get("require_checkpoint"):
        return checkpointLoad(config)

    log.log("checkpoint:missing path:%s solving" % _path, 1)

    _solution = scfSolve(context, constants, config.run.get("initial"), strict = config.strict)

    gammaSave(_path, _solution.gamma, config.model, context.grid)

    return _solution.gamma


######################
# Commands
######################

def solutionReport(solution: Solution, context: Context, constants: ConstantsEstimate, strict: bool) -> Dict[str, any]:
    """Solution summary with the spectral gap and the free reference."""

    _params = context.params

    _spectra = spectraCompute(meanField(solution.gamma, context))
    _gap, _bound = spectralGapCheck(_spectra, constants.lambda0, _params)

    solution.properties["spectral_gap"] = bool(_gap >= _bound)

    if strict and not solution.properties["spectral_gap"]:
        raise PropertyViolated("Spectral gap %.6e is below c^2 lambda0 = %.6e." % (_gap, _bound))

    _report = {**solution.dict(), "spectral_gap": {"gap": _gap, "bound": _bound, "holds": _gap >= _bound}}

    if _params.z == 0 and _params.alpha == 0:
        _report["free_reference_energy"] = freeReferenceEnergy(_params)

    return _report


def cmdSolve(config: RunConfig) -> int:
    """Runs the SCF and writes the solution files."""

    _context, _constants = contextPrepare(config)
    _params = config.model

    _gamma = checkpointLoad(config) if config.run.get("initial") == "checkpoint" else None

    _every = config.output.get("checkpoint_every")

    def _checkpoint(iteration: int, gamma: BlochDensityMatrix) -> None:
        if _every > 0 and iteration % _every == 0:
            gammaSave(config.path(CHECKPOINT_NAME), gamma, _params, _context.grid)

    _solution = scfSolve(_context, _constants, config.run.get("initial"), _gamma, strict = config.strict, callback = _checkpoint)

    diagnostics.shell.init(logfile = log.LOGFILE, logging_verbosity = config.logging_verbosity)
    _shell = diagnostics.shell.run(_context, _constants, _solution.gamma, nu = _solution.nu, strict = config.strict)

    reportSave(config.path("solution.json"), solutionReport(_solution, _context, _constants, config.strict))
    gammaSave(config.path(CHECKPOINT_NAME), _solution.gamma, _params, _context.grid)
    reportSave(config.path("shell_report.json"), _shell.dict())

    if config.output.get("csv"):
        csvSave(
            config.path("scf_history.csv"),
            ["iteration", "energy", "penalized_energy", "residual", "beta", "retraction_iters"],
            [ [_h["iteration"], _h["energy"], _h["penalized_energy"], _h["residual"], _h["beta"], _h["retraction_iters"]] for _h in _solution.history ],
        )

    _sweep = config.run.get("eps_sweep")

    if len(_sweep) > 0:
        _rows = []

        for _margin in _sweep:
            _swept = replace(_context, params = _params.replace(eps_pen_margin = float(_margin)))
            _result = scfSolve(_swept, _constants, config.run.get("initial"), _gamma)

            log.log("eps_sweep:margin:%.12e eps_P:%.12e total:%.14e" % (_margin, _result.eps_P, _result.energies.total), 1)

            _rows.append([float(_margin), _result.eps_P, _result.energies.total, _result.energies.penalized_total, _result.gamma.trace(), _result.iterations])

        csvSave(config.path("eps_sweep.csv"), ["margin", "eps_P", "energy", "penalized_energy", "trace", "iterations"], _rows)

    log.log("solve:energy:%.14e nu:%.12e residual:%.6e shell:%s" % (_solution.energies.total, _solution.nu, _solution.residual, _shell.classification), 1)

    return 0


def cmdCheck(config: RunConfig) -> int:
    """Prints the constants and the assumption report; always 0."""

    _context, _constants = contextPrepare(config, strict = False)

    _assumptions = assumptionsCheck(_constants, _context)

    diagnostics.coupling.init(logfile = log.LOGFILE, logging_verbosity = config.logging_verbosity)
    _coupling = diagnostics.coupling.run(_context, _constants, strict = False)

    _text = reportSave(config.path("check_report.json"), {
        "model": config.model.dict(),
        "constants": _constants.dict(),
        "assumptions": _assumptions.dict(),
        "coupling": _coupling.dict(),
    })

    print (_text, end="")

    return 0


def diagnosticRun(name: str, config: RunConfig) -> int:
    """Runs diagnostic 'name' and writes '<name>_report.json' and '<name>.csv'."""

    _plugin = getattr(diagnostics, name)

    _context, _constants = contextPrepare(config)

    _plugin.init(logfile = log.LOGFILE, logging_verbosity = config.logging_verbosity, **config.run)

    if name == "scaling":
        _grid = _plugin.fineGrid(_context)
        _plugin.radiiCompute(_grid, _plugin.centersCompute(_grid))

    if name == "contraction" and config.run.get("start") != "checkpoint":
        _gamma = None
    else:
        _gamma = stateObtain(config, _context, _constants)

    _report = _plugin.run(_context, _constants, _gamma, strict = config.strict)

    reportSave(config.path("%s_report.json" % name), _report.dict())

    if config.output.get("csv"):
        csvSave(config.path("%s.csv" % name), _report.header(), _report.rows())

    return 0


def cmdExpansion(config: RunConfig) -> int:
    return diagnosticRun("expansion", config)


def cmdScaling(config: RunConfig) -> int:
    return diagnosticRun("scaling", config)


def cmdBands(config: RunConfig) -> int:
    return diagnosticRun("bands", config)


def cmdContraction(config: RunConfig) -> int:
    return diagnosticRun("contraction", config)


CALLBACKS = {
    "solve": cmdSolve,
    "check": cmdCheck,
    "expansion": cmdExpansion,
    "scaling": cmdScaling,
    "bands": cmdBands,
    "contraction": cmdContraction,
}


######################
# Execute
######################

def exitCode(error: Exception) -> int:
    """Exit code of an exception raised by a command."""

    for _class, _code in EXIT_CODES:
        if isinstance(error, _class):
            return _code

    raise error


def execute(command: str, filename: str, out: str = None, mode: str = None, threads: int = None, seed: int = None) -> int:
    """Executes 'command' with the configuration stored in 'filename'.

    Arguments:
    command -- one of COMMANDS, str
    filename -- configuration file, str
    out -- output directory overriding the configuration, str, default None
    mode -- 'strict' or 'permissive' overriding the configuration, str, default None
    threads -- number of worker threads overriding the configuration, int, default None
    seed -- probe seed overriding the configuration, int, default None

    Returns:
    code -- exit code, int
    """

    print ("Starting %s version %s" % (dfcrystal.__name__, dfcrystal.__version__))

    # Overall time
    overall_time = time.time()

    try:
        _config = configurationValidate(configurationLoad(filename), command, out, mode, threads, seed)
        os.makedirs(_config.directory, exist_ok = True)
        LOGFILE = open(_config.path("run.log"), "w")
    except (ValueError, OSError) as e:
        print ("%s: %s" % (e.__class__.__name__, str(e)), file=sys.stderr)
        return exitCode(e)

    log.logfileSet(LOGFILE, _config.logging_verbosity)

    print ("Running %s version %s" % (dfcrystal.__name__, dfcrystal.__version__), file=LOGFILE)
    print ("configuration:%s" % json.dumps(json.loads(canonicalJson(_config.effective)), sort_keys = True), file=LOGFILE)
    LOGFILE.flush()

    try:
        _code = CALLBACKS[command](_config)
    except (DFCrystalError, ValueError, OSError) as e:
        _code = exitCode(e)

        print ("error:%s message:%s code:%d" % (e.__class__.__name__, str(e), _code), file=LOGFILE)
        print ("%s: %s" % (e.__class__.__name__, str(e)), file=sys.stderr)
    finally:
        print ("time:%f" % (time.time() - overall_time), file=LOGFILE)
        LOGFILE.close()

        log.logfileSet(sys.stdout, 1)
        threadsSet(1)

    print ("Command %s finished with code %d in %fs." % (command, _code, time.time() - overall_time))

    return _code
