"""
gnuplot script text for the CSV outputs. Nothing is plotted in-process;
the scripts are written next to the data for offline rendering.
"""

HEADER = """set datafile separator ','
set key top right
set grid
set terminal pngcairo size 900,600 font ',11'
"""


def ensemble_script(csv_name, png_name='ensemble.png', M=None, zeta=None, xi0_norm=1.0):
    """Semi-log plot of mean ||x(k)||^2 with its 99% band and, if given, the bound M zeta^k xi0^2"""
    lines = [
        HEADER,
        f"set output '{png_name}'",
        "set logscale y",
        "set xlabel 'k'",
        "set ylabel 'E||x(k)||^2'",
        "plot '{0}' every ::1 using 1:($2-$6):($2+$6) with filledcurves fs transparent solid 0.2 title '99% CI', \\".format(csv_name),
        "     '{0}' every ::1 using 1:2 with lines lw 2 title 'mean', \\".format(csv_name),
        "     '{0}' every ::1 using 1:($4**2) with lines dt 2 title 'max ||x||^2'".format(csv_name),
    ]
    if M is not None and zeta is not None:
        lines[-1] += ", \\"
        lines.append(f"     {M!r}*({zeta!r})**x*{float(xi0_norm) ** 2!r} with lines dt 3 title 'M zeta^k'")
    return "\n".join(lines) + "\n"


def region_script(region_csv, frontier_csv, png_name='region.png', title=''):
    """(1 - p, q) scatter of feasible cells with the max-q frontier line"""
    return "\n".join([
        HEADER,
        f"set output '{png_name}'",
        f"set title '{title}'",
        "set xlabel '1 - p'",
        "set ylabel 'q'",
        "set xrange [0:1]",
        "set yrange [0:1]",
        "plot '{0}' every ::1 using (1-$1):(strcol(3) eq \"True\" ? $2 : 1/0) with points pt 5 ps 0.3 title 'feasible', \\".format(region_csv),
        "     '{0}' every ::1 using 1:2 with lines lw 2 title 'max q'".format(frontier_csv),
    ]) + "\n"
