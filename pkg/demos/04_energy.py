"""Energy bookkeeping for a small trained network.

Trains a learnable FS+TS network for a few epochs, measures hidden firing
rates on the test split, and prices the synaptic accumulates and per-neuron
arithmetic. An instrumented event-driven run counts the same operations one
by one and should agree with the closed-form tallies.
"""
from fitsneuron.energy import count_operations, estimate_energy, instrumented_run
from fitsneuron.training import evaluate, layer_params, train
from fitsneuron.training.ablation import base_config, make_task
from fitsneuron.training.config import energy_variant

ds = make_task()
cfg = base_config(seed=0, order=1, epochs=5)
params = train(cfg, ds)["params"]
x, y = ds.split("test")
ev = evaluate(params, cfg, x, y)
variant, order = energy_variant(cfg)
steps = x.shape[1]
sizes = [cfg.n_inputs, *cfg.hidden, cfg.n_classes]
rep = estimate_energy(count_operations(sizes, variant, ev["firing_rates"], steps, order))
print(f"accuracy {ev['accuracy']:.3f}, input/hidden rates {[round(float(r), 4) for r in ev['firing_rates']]}")
print(f"per sample: layer {rep.e_layer:.4f} uJ, neuron {rep.e_neuron:.4f} uJ, total {rep.e_total:.4f} uJ")

# One sample through the instrumented simulator
layers = [layer_params(params, cfg, i)[0] for i in range(len(cfg.hidden))]
counts, rates, _ = instrumented_run(params.weights, layers, x[0], variant)
formula = count_operations(sizes, variant, rates, steps, order)
same = all(a.synaptic_acs == b.synaptic_acs and a.neuron_macs == b.neuron_macs
           for a, b in zip(counts.layers, formula.layers))
print(f"instrumented tallies match formula: {same}")
