from qiskit import ClassicalRegister, QuantumCircuit, QuantumRegister, transpile

def build():
    qc = QuantumCircuit(2, 2)
    qc.h(0)
    qc.cx(0, 1)
    qc.measure([0, 1], [0, 1])
    qc.measure(1, 0)  # expect: double-meas
    return qc
