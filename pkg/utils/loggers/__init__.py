# VSDesign 🚀, GPL-3.0 license
"""
Logging utils: console tables, JSON reports and results.csv
"""

import json
import math

import pandas as pd
import yaml

from utils.general import LOGGER, colorstr, emojis

LOGGERS = ('console', 'json', 'csv')  # stdout table, structured report, flat table
COLUMNS = ('metric', 'status', 'value', 'se', 'trials', 'reason')


def _num(x):
    return math.nan if x is None else x


class Loggers():
    #  Loggers class
    def __init__(self, save_dir=None, opt=None, logger=LOGGER, include=LOGGERS):
        self.save_dir = save_dir
        self.opt = opt
        self.logger = logger  # for printing results to console
        self.include = include
        self.check = None  # name of the running check

    def on_run_start(self):
        # Callback runs before the first check, saves the effective run settings
        if self.save_dir and self.opt is not None:
            with open(self.save_dir / 'opt.yaml', 'w') as f:
                yaml.safe_dump({k: str(v) if hasattr(v, 'parts') else v for k, v in vars(self.opt).items()}, f,
                               sort_keys=False)
        if 'console' in self.include:
            self.logger.info(('%32s' + '%10s' + '%14s' * 3) % ('Metric', 'Status', 'Value', 'SE', 'Trials'))

    def on_check_start(self, name):
        self.check = name
        self.logger.debug(f'{colorstr("check: ")}{name}')

    def on_block_end(self, block, blocks):
        self.logger.debug(f'{colorstr("check: ")}{self.check} block {block}/{blocks}')

    def on_check_end(self, fragment):
        # Callback runs after each harness fragment, one table row per check
        for c in fragment.values():
            if 'console' in self.include:
                status = colorstr('red', c.status) if c.status == 'fail' else c.status
                self.logger.info(('%32s' + '%10s' + '%14.6g' * 2 + '%14i') %
                                 (c.name, status, _num(c.value), _num(c.se), c.trials))

    def on_report_end(self, report):
        # Callback runs once the report is complete, writes report.json and results.csv
        files = []
        if self.save_dir and 'json' in self.include:
            f = self.save_dir / 'report.json'
            f.write_text(json.dumps(report.to_dict(), indent=2) + '\n')
            files.append(f)
        if self.save_dir and 'csv' in self.include:
            f = self.save_dir / 'results.csv'
            rows = [(c.name, c.status, _num(c.value), _num(c.se), c.trials, c.reason) for c in report.checks.values()]
            pd.DataFrame(rows, columns=COLUMNS).to_csv(f, index=False, float_format='%.17g')
            files.append(f)
        s = 'passed ✅' if report.passed else f'failed ❌ {report.failures}'
        self.logger.info(emojis(f"\n{report.trial_count} trials, {s}"))
        if files:
            self.logger.info(f"Results saved to {colorstr('bold', self.save_dir)}")
        return files
