from qiskit import ClassicalRegister, QuantumCircuit, QuantumRegister, transpile

def make():
    N = 2
    qc = QuantumCircuit(N, N)
    qc.h(0)
    qc.cx(0, 1)
    qc.measure_all()  # expect: meas-all-abuse
    return qc
