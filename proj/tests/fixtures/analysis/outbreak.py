# %%
import pandas as pd
import numpy as np

# %%
"""
query: Load `inputs/cases.csv` into a DataFrame named `cases` and show the first rows.
data:
  cases.csv: data/cases.csv
validator:
  namespace_check:
    cases:
"""

cases = pd.read_csv("inputs/cases.csv")
cases.head()

# %%
"""
query: Add a column `rate` to `cases` with cases per 100000 inhabitants.
validator:
  namespace_check:
    cases:
"""

cases["rate"] = cases["cases"] / cases["population"] * 100000

# %%
"""
query: Store the total number of cases per week in a Series `weekly`.
validator:
  namespace_check:
    weekly:
"""

weekly = cases.groupby("week")["cases"].sum()

# %%
"""
query: Which region reported the most deaths overall? Save it as `worst_region`.
validator:
  namespace_check:
    worst_region:
"""

worst_region = cases.groupby("region")["deaths"].sum().idxmax()
worst_region

# %%
"""
query: Compute the overall case fatality ratio `cfr` (deaths divided by cases).
validator:
  namespace_check:
    cfr:
      atol: 0.0001
"""

cfr = cases["deaths"].sum() / cases["cases"].sum()
cfr

# %%
"""
query: Find the week with the most cases as `peak_week`.
validator:
  namespace_check:
    peak_week:
"""

peak_week = weekly.idxmax()

# %%
"""
query: Keep the five rows with the highest `rate` in `top`, with columns region, week and rate.
validator:
  namespace_check:
    top:
"""

top = cases.nlargest(5, "rate")[["region", "week", "rate"]]

# %%
"""
query: Give each region's share of all cases as a Series `share`, largest first.
validator:
  namespace_check:
    share:
"""

share = (cases.groupby("region")["cases"].sum() / cases["cases"].sum()).sort_values(ascending=False)
share
