#!/usr/bin/env python3
# parameter.py
"""Parameter utils for dfcrystal.

Every configurable part of the package (model block, run blocks
of the commands, diagnostic plugins) declares its parameters
as a module level ParameterList. The lists document the
configuration (see `bin/dfcrystal --gendoc`) and validate
the JSON configuration before anything is computed.
"""
######################
# Imports & Globals
######################

from typing import Dict, Iterator, List, Tuple


######################
# Parameter class
######################

class Parameter(object):
    """Declared configuration value with its default and constraints."""

    def __init__(self, name: str, default: any, type: any = None, description: str = "", group: str = "",
            bounds: Tuple[float, float] = None, choices: List[any] = None):
        """Declares a parameter.

        name -- key in the configuration block, str
        default -- value used when the key is absent, any
        type -- expected type, any, default type of 'default'
        description -- text of the generated reference, str, default ""
        group -- block the parameter belongs to, str, default ""
        bounds -- closed interval of valid numeric values, 2-tuple, default None (unbounded)
        choices -- list of valid values, list, default None (any)
        """

        self.name = name
        self.default = default
        self.value = default
        self.type = type if type is not None else default.__class__
        self.description = description
        self.group = group
        self.bounds = bounds
        self.choices = choices


    def get(self) -> any:
        return self.value


    def set(self, value: any) -> None:
        self.value = value


    def reset(self) -> None:
        self.value = self.default


    def check(self, value: any) -> any:
        """Checks a value against the declaration.

        Arguments:
        value -- value to be checked, any

        Returns:
        value -- the value, coerced to float when float is declared, any

        Raises:
        ValueError -- when the type, bounds or choices are violated
        """

        if value is None:
            return value

        if self.type is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)

        if self.type is int and isinstance(value, bool):
            raise ValueError("Parameter '%s' expects int, got bool." % self.name)

        if not isinstance(value, self.type):
            raise ValueError("Parameter '%s' expects %s, got %s." % (self.name, self.type.__name__, value.__class__.__name__))

        if self.bounds is not None:
            if not (self.bounds[0] <= value <= self.bounds[1]):
                raise ValueError("Parameter '%s' = %s is outside of [%s, %s]." % (self.name, value, self.bounds[0], self.bounds[1]))

        if self.choices is not None and value not in self.choices:
            raise ValueError("Parameter '%s' = %s is not one of %s." % (self.name, value, self.choices))

        return value


    def __str__(self):
        return "%s: %s = %s (%s)" % (self.name, self.type.__name__, self.value, self.description)


######################
# ParameterList class
######################

class ParameterList(object):
    """Named parameters of one configuration block."""

    def __init__(self):
        self.parameters = {}


    def add(self, parameter: Parameter) -> None:
        """Inserts (or replaces) a declared parameter."""
        self.parameters[parameter.name] = parameter


    def createAdd(self, *args, **kwargs) -> None:
        """Declares a parameter, arguments as in 'Parameter'."""
        self.add(Parameter(*args, **kwargs))


    def get(self, name: str) -> Parameter:
        return self.parameters.get(name)


    def getValue(self, name: str) -> any:
        """Current value of parameter 'name'."""
        return self.parameters[name].get()


    def iterate(self) -> Iterator[Tuple[str, Parameter]]:
        yield from self.parameters.items()


    def reset(self, name: str) -> None:
        self.parameters[name].reset()


    def resetAll(self) -> None:
        """Restores the defaults of every parameter."""
        for _name in self.parameters:
            self.reset(_name)


    def update(self, name: str, value: any) -> None:
        self.parameters[name].set(value)


    def updateAll(self, kwargs: Dict[str, any], reset: bool = True) -> None:
        """Takes over the known keys of 'kwargs', others are ignored.

        reset -- restore the defaults first, bool, default True

        Note: Plugins call this with reset = True in 'init()' and with
        reset = False in 'run()'.
        """
        if reset:
            self.resetAll()

        for _name, _value in kwargs.items():
            if _name in self.parameters:
                self.update(_name, _value)


    def validate(self, values: Dict[str, any], where: str = "configuration") -> Dict[str, any]:
        """Validates a configuration block against the list.

        Arguments:
        values -- configuration block, dict
        where -- name of the block used in messages, str, default "configuration"

        Returns:
        validated -- all declared parameters, defaults filled in, dict

        Raises:
        ValueError -- on unknown keys or invalid values
        """

        if not isinstance(values, dict):
            raise ValueError("Block '%s' has to be a JSON object." % where)

        unknown = sorted(set(values.keys()) - set(self.parameters.keys()))

        if len(unknown) > 0:
            raise ValueError("Unknown keys in '%s': %s" % (where, ", ".join(unknown)))

        validated = {}

        for _name, _parameter in self.parameters.items():
            validated[_name] = _parameter.check(values[_name]) if _name in values else _parameter.default

        return validated


    def markdown(self, title: str) -> str:
        """Markdown table of the list for the parameter reference."""
        lines = ["### %s" % title, "", "| Parameter | Type | Default | Description |", "|---|---|---|---|"]

        for _name, _parameter in self.parameters.items():
            lines.append("| `%s` | %s | %s | %s |" % (_name, _parameter.type.__name__, _parameter.default, _parameter.description))

        return "\n".join(lines) + "\n"


    def __str__(self):
        return "\n".join([ str(_parameter) for _parameter in self.parameters.values() ])
