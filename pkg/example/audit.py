"""
exitduel example script - best-response audit

Compares the equilibrium rule of a middle type with the standard deviation
family on common random numbers and writes the report to audit.json.

"""

import json

from exitduel.best_response import audit_best_response
from exitduel.diffusion import GeometricBrownianMotion
from exitduel.equilibrium import ExitGame, UniformTypes
from exitduel.payoffs import ExampleProfit


game = ExitGame.build(GeometricBrownianMotion(-0.5, 1.0),
                      ExampleProfit(beta=0.5, x_cap=1000.0, m0=2.0, r=1.0),
                      UniformTypes(0.5, 1.5), dt=0.005,
                      eps_ladder=(0.08, 0.04, 0.02))

# Twelve time units keep the truncated tail below the default tolerance
noise = game.noise(seed=2024, horizon=12.0, n_paths=2000)
report = audit_best_response(game, 2.72, 1.0, noise)

print('equilibrium value {0.estimate:.4f} +- {0.stderr:.4f}'.format(report.equilibrium_value))
for deviation in report.violations:
    print('profitable deviation: {0}'.format(deviation.rule))

with open('audit.json', 'w') as audit_file:
    json.dump(report.as_dict(), audit_file, indent=2)
