import re
import textwrap

from click import Group


def remove_ansi(s):
    """https://stackoverflow.com/a/38662876/315168"""
    ansi_escape = re.compile(r'(\x9B|\x1B\[)[0-?]*[ -/]*[@-~]')
    return ansi_escape.sub('', s)


def generate_reference(cli: Group) -> str:
    """Print and return the RST command line reference of every subcommand."""
    with cli.make_context("uwsim", [], max_content_width=200, terminal_width=200, resilient_parsing=True) as ctx:
        main_help = remove_ansi(cli.get_help(ctx))
        parts = [TEMPLATE.format(textwrap.indent(main_help, "   "))]

        for name in sorted(cli.commands.keys()):
            cmd = cli.commands[name]
            with cmd.make_context(name, [], parent=ctx, resilient_parsing=True) as subcommand_ctx:
                short_help = cmd.get_short_help_str(limit=200)
                long_help = textwrap.indent(remove_ansi(cmd.get_help(subcommand_ctx)), "    ")
                parts.append(SUBCOMMAND_TEMPLATE.format(name, name, short_help, long_help))

    text = "".join(parts)
    print(text)
    return text


TEMPLATE = """
Command line reference
======================

Here is the command line reference for the ``uwsim`` command.

.. contents:: :local:

Options and config files
------------------------

Settings can be given in an INI file, specified by the ``--config`` switch, or directly on the command line.
Flags given on the command line win over the file.

Top level keys set the main command options, a ``[section]`` named after a subcommand sets its options.
E.g. these are equivalent.

Command line:

.. code-block:: shell

    uwsim --seed 7 --out dataset synthesize --input-dir nyu --preset turbid-green --samples-per-pair 3

As with INI file ``turbid.ini``:

.. code-block:: ini

    seed = 7
    out = dataset

    [synthesize]
    input-dir = nyu
    preset = turbid-green
    samples-per-pair = 3

.. code-block:: shell

    uwsim --config turbid.ini synthesize

Main command and options
------------------------

When running ``uwsim --help`` you get list of settings and subcommands:

.. code-block:: text

{}
"""


SUBCOMMAND_TEMPLATE = """

.. _{}:

{}
-------------------------------------

{}

.. code-block:: text

{}

"""
