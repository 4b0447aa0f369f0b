# %% [markdown]
# # Fisher information against background noise
#
# Instantaneous Fisher information about the beat frequency, per unit t^2,
# for coherent and entangled illumination, with ideal and heterodyne
# read-out. Values are in dB relative to heterodyne detection of the
# coherent return.

# %%
import numpy as np

from qfmcw.bench import fig3_spec, fisher_sweep

spec = fig3_spec(n_points=13)
table = fisher_sweep(spec)
assert not table.audit_failures

# %%
cols = [c for c in table.columns if c.startswith("db_")]
print("n_th".rjust(10) + "".join(c[3:].rjust(22) for c in cols))
for row in table.rows:
    vals = [row[table.columns.index(c)] for c in cols]
    print(f"{row[0]:10.3g}" + "".join(f"{v:22.3f}" for v in vals))

# %% [markdown]
# With weak noise the up-converted entangled return carries four times the
# coherent heterodyne information (about 6 dB), and the ideal-measurement
# entangled bound matches the coherent one. Under strong noise the
# entangled bounds and the strong up-conversion curve settle 3 dB above the
# baseline, while the weak up-conversion curve only approaches it.

# %%
weak, strong = table.rows[0], table.rows[-1]
for name in ("db_F_Q_tmsv", "db_F_Q_sfg", "db_F_QHD_sfg(eps_s=10)"):
    i = table.columns.index(name)
    print(f"{name:26s} weak {weak[i]:6.3f} dB   strong {strong[i]:6.3f} dB")
print("limits:", round(10 * np.log10(4), 3), round(10 * np.log10(2), 3))
