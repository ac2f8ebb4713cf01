"""
Plot Scripts
Gnuplot scripts that render the CSV artifacts; nothing here imports a plotting library
"""

from typing import List

_HEADER = """set datafile separator ','
set key autotitle columnhead
set grid
set terminal pngcairo size 1000,700
"""


def _columns(header: List[str], prefix: str) -> List[int]:
    return [idx + 1 for idx, name in enumerate(header) if name.startswith(prefix)]


def trajectory_script(header: List[str], csv_name: str = "trajectory.csv") -> str:
    prices = _columns(header, "P_")
    plots = ", ".join(f"'{csv_name}' using 1:{col} with lines" for col in prices)
    wealth = ", ".join(f"'{csv_name}' using 1:{col} with lines" for col in _columns(header, "W_"))
    return (_HEADER
            + "set output 'trajectory.png'\nset multiplot layout 2,1\n"
            + "set xlabel 'time'\nset ylabel 'price'\n"
            + f"plot {plots}\n"
            + "set ylabel 'wealth'\n"
            + f"plot {wealth}\n"
            + "unset multiplot\n")


def manifold_script(m: int, csv_name: str = "manifold.csv") -> str:
    return (_HEADER
            + "set output 'manifold.png'\nset xlabel 'cash of group 1'\nset ylabel 'equilibrium price'\n"
            + "stable(s, p) = s == 1 ? p : 1/0\nunstable(s, p) = s == 0 ? p : 1/0\n"
            + f"plot '{csv_name}' using 1:(stable(column('stable'), column('P_eq_1'))) with points pt 7 title 'stable', \\\n"
            + f"     '{csv_name}' using 1:(unstable(column('stable'), column('P_eq_1'))) with points pt 7 title 'unstable'\n")


def bifurcation_script(threshold: float = None, csv_name: str = "bifurcation.csv") -> str:
    marker = f"set arrow from {threshold},graph 0 to {threshold},graph 1 nohead dt 2\n" if threshold is not None else ""
    return (_HEADER
            + "set output 'bifurcation.png'\nset multiplot layout 2,1\n"
            + marker
            + "set xlabel 'parameter'\nset ylabel 'price'\n"
            + f"plot '{csv_name}' using 'parameter':'Pmax' with linespoints title 'P max', \\\n"
            + f"     '{csv_name}' using 'parameter':'Pmin' with linespoints title 'P min'\n"
            + "set ylabel 'period'\n"
            + f"plot '{csv_name}' using 'parameter':'period' with linespoints title 'period'\n"
            + "unset multiplot\n")


def excursion_script(csv_name: str = "excursion_grid.csv") -> str:
    return (_HEADER
            + "set output 'excursion.png'\nset view map\nset xlabel 'dP_1'\nset ylabel 'dP_2'\n"
            + "set dgrid3d 30,30\n"
            + f"splot '{csv_name}' using 'dP_1':'dP_2':'E_1' with pm3d title 'excursion of asset 1'\n")


def contagion_script(gamma: List[List[float]], names: List[str]) -> str:
    rows = "\n".join(" ".join(f"{value:.10g}" for value in row) for row in gamma)
    labels = ", ".join(f"'{name}' {idx}" for idx, name in enumerate(names))
    return ("set terminal pngcairo size 700,600\nset output 'contagion.png'\n"
            + f"set xtics ({labels})\nset ytics ({labels})\n"
            + "set xlabel 'shocked asset'\nset ylabel 'responding asset'\n"
            + "$gamma << EOD\n" + rows + "\nEOD\n"
            + "plot $gamma matrix with image title 'contagion'\n")
