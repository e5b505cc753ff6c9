from tabulate import tabulate
import pandas as pd

def table_format(output_list, columns, floatfmt=".4f"):
    df = pd.DataFrame(output_list, columns=columns)
    return tabulate(df, headers="keys", tablefmt="psql", showindex=False, floatfmt=floatfmt)

def table_format_print(output_list, columns, floatfmt=".4f"):
    print(table_format(output_list, columns, floatfmt))
