"""
exitduel example script - the worked example

Builds the equilibrium for a geometric Brownian motion with the capped
square-root duopoly flow, plays one game between a high and a low type and
prints the threshold table, the outcome and the exit schedule.

"""

from exitduel.diffusion import GeometricBrownianMotion, simulate_path
from exitduel.equilibrium import (ExitGame, UniformTypes, exit_schedule, integrate_belief,
                                  simulate_game)
from exitduel.payoffs import ExampleProfit


# Describe the state, the profit flows and the exit values
model = GeometricBrownianMotion(-0.5, 1.0)
profit = ExampleProfit(beta=0.5, x_cap=1000.0, m0=2.0, r=1.0)
types = UniformTypes(0.5, 1.5)

# Tabulate the thresholds and set up the belief integration
game = ExitGame.build(model, profit, types, dt=0.002, eps_ladder=(0.08, 0.04, 0.02, 0.01))
for theta in (0.5, 1.0, 1.5):
    print('alpha({0}) = {1:.4f}'.format(theta, float(game.table.alpha(theta))))

# Play one game
outcome = simulate_game(game, 2.72, 1.4, 1.0, seed=1, horizon=5.0)
print(outcome)

# Exit times of all types along the same path
noise = game.noise(1, 5.0, 1)
path = simulate_path(model, 2.72, 5.0, noise)
belief = integrate_belief(game, path)
thetas = game.table.thetas[1::20]
for theta, tau in zip(thetas, exit_schedule(game, belief, thetas)):
    print('theta={0:.3f}  tau_hat={1:.3f}'.format(theta, tau))
