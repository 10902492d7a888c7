import os
import configparser


# Built-in defaults, overridden by config.txt, overridden by CLI flags
DEFAULTS = {
    'settings': {
        'debug': 'false',
        'log_level': 'info',
    },
    'oracle': {
        'max_spins': '24',
        'chunk_bits': '16',
    },
    'trw': {
        'damping': '0.5',
        'tol': '1e-10',
        'max_iter': '10000',
        'solver': 'auto',
    },
    'sampler': {
        'sweeps': '100000',
        'burn_in': '1000',
        'thin': '1',
        'chains': '1',
    },
    'learner': {
        'learning_rate': '0.1',
        'updates': '10000',
        'mc_steps': '100',
        'estimator': 'mcmc',
        'chains': '1',
    },
    'bench': {
        'jobs': '1',
        'trials': '10',
    },
    'spikes': {
        'tau': '0.001',
    },
}


class ConfigManager:
    def __init__(self, config_path=None, debug_override=None):
        # Get the directory where this script/module is located
        self.script_dir = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

        if config_path is None:
            config_path = os.getenv('ISING_CONFIG', 'config.txt')

        # If path is relative, make it relative to script directory
        if not os.path.isabs(config_path):
            self.config_path = os.path.join(self.script_dir, config_path)
        else:
            self.config_path = config_path

        self._config = None
        self.debug_override = debug_override

    def _load_config(self):
        """Load INI config file on top of the built-in defaults"""
        if self._config is None:
            self._config = configparser.ConfigParser()
            self._config.read_dict(DEFAULTS)
            try:
                # A missing file is not an error: defaults apply
                self._config.read(self.config_path)
            except configparser.Error as e:
                raise ValueError(f"Error reading config file {self.config_path}: {e}")
        return self._config

    def get_setting(self, section, key, default=None):
        """Get a setting value"""
        config = self._load_config()
        value = config.get(section, key, fallback=default)

        # Strip inline comments if value is a string
        if isinstance(value, str) and '#' in value:
            value = value.split('#')[0].strip()

        return value

    def get_boolean_setting(self, section, key, default='false'):
        """Get a boolean setting value (converts 'true'/'false' strings to bool)"""
        # Check for debug override when key is 'debug'
        if key == 'debug' and self.debug_override is not None:
            return self.debug_override

        if isinstance(default, bool):
            default = 'true' if default else 'false'

        result = self.get_setting(section, key, str(default))
        if isinstance(result, bool):
            return result
        return str(result).lower() in ('true', 'yes', '1', 'on')

    def get_int_setting(self, section, key, default=0):
        """Get an integer setting value"""
        value = self.get_setting(section, key, str(default))
        try:
            return int(float(value))
        except ValueError:
            raise ValueError(f"Setting [{section}] {key} must be an integer, got {value!r}")

    def get_float_setting(self, section, key, default=0.0):
        """Get a float setting value"""
        value = self.get_setting(section, key, str(default))
        try:
            return float(value)
        except ValueError:
            raise ValueError(f"Setting [{section}] {key} must be a number, got {value!r}")

    def get_log_level(self):
        """Resolve verbosity: --debug, then ISING_LOG, then [settings] log_level"""
        if self.get_boolean_setting('settings', 'debug'):
            return 'debug'
        env_level = os.getenv('ISING_LOG')
        if env_level:
            return env_level.strip().lower()
        return str(self.get_setting('settings', 'log_level', 'info')).lower()
